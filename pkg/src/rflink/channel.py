"""Channel impairments: AWGN at a target in-band SNR, free-space path loss,
and a deterministic tapped-delay multipath model with per-tap Doppler.

SNR convention: noise is white across the full sample rate but scaled so
that the portion falling in the occupied bandwidth equals signal_power /
10^(snr_db/10). Composition order is multipath -> path-loss scaling -> AWGN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import fft, ifft, next_fast_len

from .errors import DelayTooLarge, NonPositiveInput, ZeroSignal
from .modem import IqBlock
from .units import SPEED_OF_LIGHT, dbm_to_vrms


def derive_rng(master_seed, *stream: int) -> np.random.Generator:
    """Deterministic per-trial generator; independent of worker scheduling.

    master_seed may be an int or a sequence of ints (a composite key). The
    key length is folded into the entropy because SeedSequence zero-pads
    its input, which would otherwise alias (s,) with (s, 0).
    """
    if isinstance(master_seed, (list, tuple)):
        key = [int(s) & 0xFFFFFFFFFFFFFFFF for s in master_seed]
    else:
        key = [int(master_seed) & 0xFFFFFFFFFFFFFFFF]
    key.extend(stream)
    return np.random.default_rng([len(key), *key])


@dataclass(frozen=True)
class ChannelTap:
    delay_s: float
    gain: float  # amplitude gain
    doppler_hz: float = 0.0

    def __post_init__(self):
        if self.delay_s < 0:
            raise ValueError("tap delay must be >= 0")


@dataclass(frozen=True)
class ChannelProfile:
    """Link conditions seen at the receiver input.

    rx_power_dbm is the post-path-loss signal power. When distance_m is
    given, rx_power_dbm is derived from tx_power_dbm via free-space path
    loss and must not be set directly.
    """

    snr_db: float = math.inf
    rx_power_dbm: float | None = None
    distance_m: float | None = None
    tx_power_dbm: float | None = None
    carrier_hz: float = 2.4e9
    taps: tuple[ChannelTap, ...] = field(default_factory=tuple)
    seed: int = 0

    def __post_init__(self):
        if self.distance_m is not None:
            if self.rx_power_dbm is not None:
                raise ValueError("rx_power_dbm is derived from distance_m; set only one")
            if self.tx_power_dbm is None:
                raise ValueError("distance_m requires tx_power_dbm")
            derived = self.tx_power_dbm - path_loss_db(self.distance_m, self.carrier_hz)
            object.__setattr__(self, "rx_power_dbm", derived)


def path_loss_db(distance_m: float, carrier_hz: float) -> float:
    """Free-space path loss 20*log10(4*pi*d*f/c)."""
    if distance_m <= 0 or carrier_hz <= 0:
        raise NonPositiveInput("distance and carrier frequency must be > 0")
    return 20.0 * math.log10(4.0 * math.pi * distance_m * carrier_hz / SPEED_OF_LIGHT)


def apply_awgn(
    block: IqBlock,
    snr_db: float,
    rng: np.random.Generator,
    occupied_bw_hz: float | None = None,
) -> IqBlock:
    """Add circular complex Gaussian noise for the requested in-band SNR.

    occupied_bw_hz defaults to the full sample rate (flat-band convention).
    """
    if math.isinf(snr_db) and snr_db > 0:
        return block
    x = block.samples
    p_sig = float(np.mean(np.abs(x) ** 2))
    if p_sig == 0.0:
        raise ZeroSignal("cannot set a finite SNR on a zero-power block")
    bw = occupied_bw_hz if occupied_bw_hz is not None else block.sample_rate_hz
    if not 0 < bw <= block.sample_rate_hz:
        raise ValueError("occupied_bw_hz must lie in (0, sample_rate]")
    var_total = p_sig / 10.0 ** (snr_db / 10.0) * (block.sample_rate_hz / bw)
    scale = math.sqrt(var_total / 2.0)
    noise = rng.normal(scale=scale, size=len(x)) + 1j * rng.normal(scale=scale, size=len(x))
    return block.with_samples(x + noise)


def apply_multipath(
    block: IqBlock,
    taps: tuple[ChannelTap, ...] | list[ChannelTap],
    rng: np.random.Generator | None = None,
) -> IqBlock:
    """y(t) = sum_k g_k * exp(j*2*pi*nu_k*t) * x(t - tau_k).

    Fractional delays use exact bandlimited (FFT phase-ramp) interpolation;
    the output is extended so no delayed energy is truncated. Doppler is a
    deterministic per-tap rotation, so rng is unused.
    """
    if not taps:
        return block
    x = block.samples
    fs = block.sample_rate_hz
    max_delay = max(t.delay_s for t in taps)
    if max_delay >= block.duration_s:
        raise DelayTooLarge(f"max tap delay {max_delay:g}s >= block duration {block.duration_s:g}s")

    n_pad = int(math.ceil(max_delay * fs))
    out_len = len(x) + n_pad
    nfft = next_fast_len(out_len + 64)
    spectrum = fft(x, nfft)
    freqs = np.fft.fftfreq(nfft, d=1.0 / fs)
    t = np.arange(out_len) / fs

    out = np.zeros(out_len, dtype=np.complex128)
    for tap in taps:
        delayed = ifft(spectrum * np.exp(-2j * np.pi * freqs * tap.delay_s))[:out_len]
        if tap.doppler_hz:
            delayed = delayed * np.exp(2j * np.pi * tap.doppler_hz * t)
        out += tap.gain * delayed
    return block.with_samples(out)


def scale_to_power(block: IqBlock, power_dbm: float) -> IqBlock:
    """Set the block RMS to the given power (the path-loss scaling step)."""
    rms = float(np.sqrt(np.mean(np.abs(block.samples) ** 2)))
    if rms == 0.0:
        raise ZeroSignal("cannot scale a zero-power block to a target power")
    return block.with_samples(block.samples * (dbm_to_vrms(power_dbm) / rms))


def apply_channel(
    block: IqBlock,
    profile: ChannelProfile,
    rng: np.random.Generator,
    occupied_bw_hz: float | None = None,
) -> IqBlock:
    """Full channel: multipath, then power scaling, then AWGN."""
    out = apply_multipath(block, profile.taps)
    if profile.rx_power_dbm is not None:
        out = scale_to_power(out, profile.rx_power_dbm)
    return apply_awgn(out, profile.snr_db, rng, occupied_bw_hz)
