"""PHY packet framing: PN preamble, SFD, checksummed header and payload.

Layout (MSB-first bit packing):

    preamble:64 | sfd:8 | frame_length:8 | modulation_code:8 | header_csc:16
    | payload:8*frame_length | payload_csc:16

A 252-byte payload gives 2136 bits per frame, so a two-frame burst is
exactly 4272 bits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import HeaderCorrupt, PayloadTooLarge, Truncated

BitStream = np.ndarray  # 1-D uint8 array of 0/1 values

SFD = 0xA7
PREAMBLE_BITS = 64
MAX_PAYLOAD_BYTES = 255

# modulation_code values carried in the header
MODULATION_CODES = {0x01: "bpsk", 0x02: "qpsk", 0x03: "ook"}
CODE_FOR_MODULATION = {name: code for code, name in MODULATION_CODES.items()}

_HEADER_AND_CSC_BITS = PREAMBLE_BITS + 8 + 8 + 8 + 16  # through header_csc
_PAYLOAD_CSC_BITS = 16


def _pn_bits(n_bits: int, seed: int = 0b111111) -> np.ndarray:
    """Maximal-length sequence from the 6-bit LFSR x^6 + x^5 + 1, repeated."""
    state = seed & 0x3F
    out = np.empty(n_bits, dtype=np.uint8)
    for i in range(n_bits):
        msb = (state >> 5) & 1
        out[i] = msb
        fb = msb ^ ((state >> 4) & 1)
        state = ((state << 1) | fb) & 0x3F
    return out


PREAMBLE = bytes(np.packbits(_pn_bits(PREAMBLE_BITS)))


def _crc16_table() -> list[int]:
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021) if crc & 0x8000 else (crc << 1)
        table.append(crc & 0xFFFF)
    return table


_CRC16_TABLE = _crc16_table()


def crc16(data: bytes) -> int:
    """CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection or xorout."""
    crc = 0xFFFF
    for byte in data:
        crc = ((crc << 8) & 0xFFFF) ^ _CRC16_TABLE[(crc >> 8) ^ byte]
    return crc


@dataclass(frozen=True)
class Frame:
    preamble: bytes
    sfd: int
    frame_length: int
    modulation_code: int
    header_csc: int
    payload: bytes
    payload_csc: int

    def n_bits(self) -> int:
        return _HEADER_AND_CSC_BITS + 8 * self.frame_length + _PAYLOAD_CSC_BITS


@dataclass(frozen=True)
class ParsedFrame:
    """Frame plus per-section checksum verdicts.

    A payload checksum failure is a packet error, not a parse failure;
    header corruption is represented by frame=None.
    """

    frame: Frame | None
    header_ok: bool
    payload_ok: bool
    modulation_known: bool = True

    @property
    def packet_error(self) -> bool:
        return not (self.header_ok and self.payload_ok)


def build_frame(payload: bytes, modulation_code: int) -> Frame:
    if len(payload) > MAX_PAYLOAD_BYTES:
        raise PayloadTooLarge(f"payload is {len(payload)} bytes, limit {MAX_PAYLOAD_BYTES}")
    if len(payload) < 1:
        raise ValueError("payload must contain at least one byte")
    if not 0 <= modulation_code <= 0xFF:
        raise ValueError("modulation_code out of range")
    header = bytes([len(payload), modulation_code])
    return Frame(
        preamble=PREAMBLE,
        sfd=SFD,
        frame_length=len(payload),
        modulation_code=modulation_code,
        header_csc=crc16(header),
        payload=bytes(payload),
        payload_csc=crc16(payload),
    )


def _int_bits(value: int, width: int) -> np.ndarray:
    return ((value >> np.arange(width - 1, -1, -1)) & 1).astype(np.uint8)


def serialize_frame(frame: Frame) -> BitStream:
    return np.concatenate([
        np.unpackbits(np.frombuffer(frame.preamble, dtype=np.uint8)),
        _int_bits(frame.sfd, 8),
        _int_bits(frame.frame_length, 8),
        _int_bits(frame.modulation_code, 8),
        _int_bits(frame.header_csc, 16),
        np.unpackbits(np.frombuffer(frame.payload, dtype=np.uint8)),
        _int_bits(frame.payload_csc, 16),
    ])


def _bits_int(bits: np.ndarray) -> int:
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    return value


def parse_frame(bits: BitStream) -> ParsedFrame:
    """Parse a frame whose structure starts at bit 0 (preamble first).

    Raises HeaderCorrupt on SFD or header-checksum mismatch, Truncated when
    fewer bits are present than the header's frame_length implies.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    if len(bits) < _HEADER_AND_CSC_BITS:
        raise Truncated(f"{len(bits)} bits, need {_HEADER_AND_CSC_BITS} for the header")

    pos = PREAMBLE_BITS
    sfd = _bits_int(bits[pos:pos + 8])
    frame_length = _bits_int(bits[pos + 8:pos + 16])
    modulation_code = _bits_int(bits[pos + 16:pos + 24])
    header_csc = _bits_int(bits[pos + 24:pos + 40])

    if sfd != SFD:
        raise HeaderCorrupt(f"SFD 0x{sfd:02X} != 0x{SFD:02X}")
    if crc16(bytes([frame_length, modulation_code])) != header_csc:
        raise HeaderCorrupt("header checksum mismatch")

    total_bits = _HEADER_AND_CSC_BITS + 8 * frame_length + _PAYLOAD_CSC_BITS
    if len(bits) < total_bits:
        raise Truncated(f"{len(bits)} bits, frame_length={frame_length} implies {total_bits}")

    pos = _HEADER_AND_CSC_BITS
    payload = bytes(np.packbits(bits[pos:pos + 8 * frame_length]))
    payload_csc = _bits_int(bits[pos + 8 * frame_length:pos + 8 * frame_length + 16])

    frame = Frame(
        preamble=bytes(np.packbits(bits[:PREAMBLE_BITS])),
        sfd=sfd,
        frame_length=frame_length,
        modulation_code=modulation_code,
        header_csc=header_csc,
        payload=payload,
        payload_csc=payload_csc,
    )
    return ParsedFrame(
        frame=frame,
        header_ok=True,
        payload_ok=crc16(payload) == payload_csc,
        modulation_known=modulation_code in MODULATION_CODES,
    )


def parse_frame_lenient(bits: BitStream) -> ParsedFrame:
    """parse_frame that maps HeaderCorrupt/Truncated to a packet-error record."""
    try:
        return parse_frame(bits)
    except (HeaderCorrupt, Truncated):
        return ParsedFrame(frame=None, header_ok=False, payload_ok=False, modulation_known=False)
