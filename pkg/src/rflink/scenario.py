"""Scenario description: waveform, channel and receiver settings for one
simulated link. File parsing/serialization lives in rflink.io."""

from __future__ import annotations

from dataclasses import dataclass, field

from .channel import ChannelProfile
from .framing import MAX_PAYLOAD_BYTES
from .modem import SCHEMES
from .rfchain import LpfSpec, RfBlockParams

SYMBOL_FILTERS = ("matched", "boxcar")


@dataclass(frozen=True)
class WaveformSpec:
    modulation: str = "qpsk"
    symbol_rate_hz: float = 62_500.0
    sps: int = 8
    rolloff: float = 0.35
    packets: int = 2
    payload_bytes: int = 252
    carrier_hz: float = 2.4e9

    def __post_init__(self):
        if self.modulation not in SCHEMES:
            raise ValueError(f"unknown modulation {self.modulation!r}")
        if self.sps < 2:
            raise ValueError("sps must be >= 2")
        if not 0.0 <= self.rolloff <= 1.0:
            raise ValueError("rolloff must lie in [0, 1]")
        if self.packets < 1:
            raise ValueError("packets must be >= 1")
        if not 1 <= self.payload_bytes <= MAX_PAYLOAD_BYTES:
            raise ValueError(f"payload_bytes must lie in [1, {MAX_PAYLOAD_BYTES}]")
        if self.symbol_rate_hz <= 0 or self.carrier_hz <= 0:
            raise ValueError("rates and frequencies must be positive")

    @property
    def sample_rate_hz(self) -> float:
        return self.sps * self.symbol_rate_hz

    @property
    def occupied_bw_hz(self) -> float:
        return self.symbol_rate_hz * (1.0 + self.rolloff)


@dataclass(frozen=True)
class RxSpec:
    bias_ua: float = 500.0
    mixer_gain_db: float = 10.0
    mixer_nf_db: float = 10.0
    mixer_iip3_dbm: float = 5.0
    lpf_cutoff_hz: float = 100_000.0
    symbol_filter: str = "matched"

    def __post_init__(self):
        if self.symbol_filter not in SYMBOL_FILTERS:
            raise ValueError(f"symbol_filter must be one of {SYMBOL_FILTERS}")

    @property
    def mixer_params(self) -> RfBlockParams:
        return RfBlockParams(self.mixer_gain_db, self.mixer_nf_db, self.mixer_iip3_dbm, "mixer")

    @property
    def lpf(self) -> LpfSpec:
        return LpfSpec(self.lpf_cutoff_hz)


@dataclass(frozen=True)
class Scenario:
    waveform: WaveformSpec = field(default_factory=WaveformSpec)
    channel: ChannelProfile = field(default_factory=ChannelProfile)
    rx: RxSpec = field(default_factory=RxSpec)

    @property
    def seed(self) -> int:
        return self.channel.seed

    def frame_bits(self) -> int:
        return 120 + 8 * self.waveform.payload_bytes

    def bits_per_trial(self) -> int:
        return self.waveform.packets * self.frame_bits()

    def with_packets(self, packets: int) -> "Scenario":
        wf = self.waveform
        return Scenario(
            WaveformSpec(wf.modulation, wf.symbol_rate_hz, wf.sps, wf.rolloff,
                         packets, wf.payload_bytes, wf.carrier_hz),
            self.channel,
            self.rx,
        )


def reference_scenario(seed: int = 7) -> Scenario:
    """Shipped default: a two-packet QPSK burst (4272 bits) received at
    -100 dBm with 20 dB channel SNR."""
    return Scenario(
        waveform=WaveformSpec(),
        channel=ChannelProfile(snr_db=20.0, rx_power_dbm=-100.0, seed=seed),
        rx=RxSpec(),
    )
