"""Link scoring against ground truth: BER, SER, EVM, MER, PER.

EVM is computed from means and MER from energy totals, both normalized to
the reference power, which makes them exact duals:
mer_db = -20*log10(evm_rms_pct/100).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyInput, IoError, LengthMismatch
from .framing import BitStream, ParsedFrame
from .modem import ModulationScheme, SymbolRecord, slice_symbols


@dataclass(frozen=True)
class MetricsReport:
    bit_errors: int = 0
    bits_total: int = 0
    ber: float = 0.0
    symbol_errors: int = 0
    symbols_total: int = 0
    ser: float = 0.0
    evm_rms_pct: float = 0.0
    mer_db: float = math.inf
    packets_total: int = 0
    packet_errors: int = 0
    per: float = 0.0
    bias_ua: float = 0.0
    power_mw: float = 0.0
    # energy sums kept so reports merge exactly
    err_energy: float = 0.0
    ref_energy: float = 0.0


def build_report(
    bit_errors: int,
    bits_total: int,
    symbol_errors: int,
    symbols_total: int,
    err_energy: float,
    ref_energy: float,
    packet_errors: int,
    packets_total: int,
    bias_ua: float = 0.0,
    power_mw: float = 0.0,
) -> MetricsReport:
    if ref_energy > 0:
        evm = 100.0 * math.sqrt(err_energy / ref_energy)
        mer = 10.0 * math.log10(ref_energy / err_energy) if err_energy > 0 else math.inf
    else:  # nothing demodulated (e.g. every packet lost sync)
        evm = math.nan
        mer = -math.inf
    return MetricsReport(
        bit_errors=bit_errors,
        bits_total=bits_total,
        ber=bit_errors / bits_total if bits_total else 0.0,
        symbol_errors=symbol_errors,
        symbols_total=symbols_total,
        ser=symbol_errors / symbols_total if symbols_total else 0.0,
        evm_rms_pct=evm,
        mer_db=mer,
        packets_total=packets_total,
        packet_errors=packet_errors,
        per=packet_errors / packets_total if packets_total else math.nan,
        bias_ua=bias_ua,
        power_mw=power_mw,
        err_energy=err_energy,
        ref_energy=ref_energy,
    )


def merge_reports(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Sum the counts of parallel trials, then recompute the rates."""
    if not reports:
        raise EmptyInput("no reports to merge")
    return build_report(
        bit_errors=sum(r.bit_errors for r in reports),
        bits_total=sum(r.bits_total for r in reports),
        symbol_errors=sum(r.symbol_errors for r in reports),
        symbols_total=sum(r.symbols_total for r in reports),
        err_energy=sum(r.err_energy for r in reports),
        ref_energy=sum(r.ref_energy for r in reports),
        packet_errors=sum(r.packet_errors for r in reports),
        packets_total=sum(r.packets_total for r in reports),
        bias_ua=reports[0].bias_ua,
        power_mw=reports[0].power_mw,
    )


def compute_ber(rx: BitStream, tx: BitStream) -> tuple[int, int, float]:
    rx = np.asarray(rx, dtype=np.uint8)
    tx = np.asarray(tx, dtype=np.uint8)
    if len(rx) != len(tx):
        raise LengthMismatch(f"rx has {len(rx)} bits, tx has {len(tx)}")
    errors = int(np.sum(rx != tx))
    return errors, len(tx), errors / len(tx) if len(tx) else 0.0


def compute_ser(
    rx_syms: np.ndarray,
    tx_syms: np.ndarray,
    scheme: ModulationScheme,
) -> tuple[int, int, float]:
    """Fraction of symbols whose sliced constellation point differs."""
    rx_syms = np.asarray(rx_syms, dtype=np.complex128)
    tx_syms = np.asarray(tx_syms, dtype=np.complex128)
    if len(rx_syms) != len(tx_syms):
        raise LengthMismatch(f"rx has {len(rx_syms)} symbols, tx has {len(tx_syms)}")
    errors = int(np.sum(slice_symbols(rx_syms, scheme) != slice_symbols(tx_syms, scheme)))
    return errors, len(tx_syms), errors / len(tx_syms) if len(tx_syms) else 0.0


def _energies(records: Iterable[SymbolRecord]) -> tuple[float, float]:
    rx = np.array([r.rx for r in records], dtype=np.complex128)
    ref = np.array([r.ref for r in records], dtype=np.complex128)
    if len(rx) == 0:
        raise EmptyInput("no symbol records")
    return float(np.sum(np.abs(rx - ref) ** 2)), float(np.sum(np.abs(ref) ** 2))


def compute_evm(records: Sequence[SymbolRecord]) -> float:
    """RMS error vector magnitude in percent of RMS reference."""
    err, ref = _energies(records)
    return 100.0 * math.sqrt(err / ref)


def compute_mer(records: Sequence[SymbolRecord]) -> float:
    """10*log10(sum|ref|^2 / sum|rx-ref|^2); +inf for a perfect signal."""
    err, ref = _energies(records)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(ref / err)


def compute_per(frames: Sequence[ParsedFrame]) -> tuple[int, int, float]:
    """Packet error = any checksum failure or header corruption.

    Zero frames yield a NaN rate (no result), not a division error.
    """
    total = len(frames)
    errors = sum(1 for f in frames if f.packet_error)
    return errors, total, errors / total if total else math.nan


def fit_gain(rx_points: np.ndarray, true_points: np.ndarray) -> complex:
    """Least-squares complex gain aligning received points to references."""
    if len(rx_points) != len(true_points):
        raise LengthMismatch(f"{len(rx_points)} received vs {len(true_points)} reference symbols")
    return complex(np.vdot(true_points, rx_points) / np.vdot(true_points, true_points))


def truth_energies(rx_points: np.ndarray, true_points: np.ndarray) -> tuple[float, float]:
    """(error energy, reference energy) after the LS gain fit."""
    g = fit_gain(rx_points, true_points)
    err = float(np.sum(np.abs(rx_points / g - true_points) ** 2))
    return err, float(np.sum(np.abs(true_points) ** 2))


def records_with_truth(
    rx_points: np.ndarray,
    true_points: np.ndarray,
    index_offset: int = 0,
) -> list[SymbolRecord]:
    """Records against known transmitted symbols, with the received set
    fitted to the references by one complex least-squares gain."""
    rx_points = np.asarray(rx_points, dtype=np.complex128)
    true_points = np.asarray(true_points, dtype=np.complex128)
    rx_fit = rx_points / fit_gain(rx_points, true_points)
    return [
        SymbolRecord(index_offset + i, complex(rx_fit[i]), complex(true_points[i]))
        for i in range(len(rx_fit))
    ]


def export_constellation(records: Sequence[SymbolRecord], path) -> None:
    """CSV of received vs reference points, ordered by symbol index."""
    lines = ["index,i_rx,q_rx,i_ref,q_ref"]
    for r in sorted(records, key=lambda r: r.index):
        lines.append(
            f"{r.index},{r.rx.real:.9e},{r.rx.imag:.9e},{r.ref.real:.9e},{r.ref.imag:.9e}"
        )
    try:
        with open(path, "w", newline="") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
