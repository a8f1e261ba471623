"""File formats: scenario configs, PWL waveform interchange with circuit
simulators, LNA table files and run reports.

All writers emit deterministic bytes for identical inputs; nothing here
embeds timestamps. Scenario files are INI-style with sections [waveform],
[channel] and [rx]; unknown sections or keys fail closed.
"""

from __future__ import annotations

import configparser
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.signal import resample

from .channel import ChannelProfile, ChannelTap
from .errors import IoError, NonMonotoneTime, ParseError, RateTooLow, ValidationError
from .metrics import MetricsReport
from .modem import IqBlock
from .rfchain import LnaBiasTable, RfBlockParams
from .scenario import RxSpec, Scenario, WaveformSpec
from .tuner import TunerResult

_WAVEFORM_KEYS = (
    "modulation", "symbol_rate_hz", "sps", "rolloff", "packets",
    "payload_bytes", "carrier_hz",
)
_CHANNEL_KEYS = (
    "snr_db", "rx_power_dbm", "distance_m", "tx_power_dbm", "taps", "seed",
)
_RX_KEYS = (
    "bias_ua", "mixer_gain_db", "mixer_nf_db", "mixer_iip3_dbm",
    "lpf_cutoff_hz", "symbol_filter",
)

PWL_MODES = ("baseband_i", "baseband_q", "passband")
EXPORT_STAGES = ("tx", "post-channel", "post-lna", "post-mixer", "post-lpf")


# --- scenario files ---

def _num(section: str, key: str, raw: str, kind=float):
    try:
        return kind(raw)
    except ValueError:
        raise ValidationError(f"[{section}] {key} = {raw!r} is not a valid {kind.__name__}") from None


def _parse_taps(raw: str) -> tuple[ChannelTap, ...]:
    taps = []
    for i, item in enumerate(filter(None, (s.strip() for s in raw.split(";")))):
        parts = item.split(":")
        if len(parts) != 3:
            raise ValidationError(f"[channel] taps entry {i}: expected delay:gain:doppler, got {item!r}")
        try:
            taps.append(ChannelTap(float(parts[0]), float(parts[1]), float(parts[2])))
        except ValueError as exc:
            raise ValidationError(f"[channel] taps entry {i}: {exc}") from None
    return tuple(taps)


def _format_taps(taps: Sequence[ChannelTap]) -> str:
    return ";".join(f"{t.delay_s!r}:{t.gain!r}:{t.doppler_hz!r}" for t in taps)


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario file; unknown keys are errors."""
    parser = configparser.ConfigParser(
        delimiters=("=",), comment_prefixes=("#",), inline_comment_prefixes=("#",),
        interpolation=None, strict=True,
    )
    try:
        with open(path) as fh:
            parser.read_file(fh, source=str(path))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError(str(exc.message), line=exc.lineno) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if getattr(exc, "errors", None) else None
        raise ParseError("malformed scenario file", line=line) from None
    except configparser.Error as exc:
        raise ParseError(str(exc)) from None

    for section in parser.sections():
        if section not in ("waveform", "channel", "rx"):
            raise ValidationError(f"unknown section [{section}]")

    def section_items(name: str, allowed: tuple[str, ...]) -> dict[str, str]:
        if not parser.has_section(name):
            return {}
        items = dict(parser.items(name))
        for key in items:
            if key not in allowed:
                raise ValidationError(f"unknown key {key!r} in [{name}]")
        return items

    wf_raw = section_items("waveform", _WAVEFORM_KEYS)
    ch_raw = section_items("channel", _CHANNEL_KEYS)
    rx_raw = section_items("rx", _RX_KEYS)

    wf_kwargs = {}
    if "modulation" in wf_raw:
        wf_kwargs["modulation"] = wf_raw["modulation"]
    for key, kind in (("symbol_rate_hz", float), ("sps", int), ("rolloff", float),
                      ("packets", int), ("payload_bytes", int), ("carrier_hz", float)):
        if key in wf_raw:
            wf_kwargs[key] = _num("waveform", key, wf_raw[key], kind)

    ch_kwargs = {}
    for key in ("snr_db", "rx_power_dbm", "distance_m", "tx_power_dbm"):
        if key in ch_raw:
            ch_kwargs[key] = _num("channel", key, ch_raw[key])
    if "seed" in ch_raw:
        ch_kwargs["seed"] = _num("channel", "seed", ch_raw["seed"], int)
    if "taps" in ch_raw:
        ch_kwargs["taps"] = _parse_taps(ch_raw["taps"])

    rx_kwargs = {}
    for key in ("bias_ua", "mixer_gain_db", "mixer_nf_db", "mixer_iip3_dbm", "lpf_cutoff_hz"):
        if key in rx_raw:
            rx_kwargs[key] = _num("rx", key, rx_raw[key])
    if "symbol_filter" in rx_raw:
        rx_kwargs["symbol_filter"] = rx_raw["symbol_filter"]

    try:
        waveform = WaveformSpec(**wf_kwargs)
        ch_kwargs.setdefault("carrier_hz", waveform.carrier_hz)
        return Scenario(waveform=waveform, channel=ChannelProfile(**ch_kwargs), rx=RxSpec(**rx_kwargs))
    except ValueError as exc:
        raise ValidationError(str(exc)) from None


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def save_scenario(scenario: Scenario, path) -> None:
    """Write the canonical normalized form (stable key order, repr floats)."""
    wf, ch, rx = scenario.waveform, scenario.channel, scenario.rx
    lines = ["[waveform]"]
    lines += [f"{k} = {_fmt(getattr(wf, k))}" for k in _WAVEFORM_KEYS]
    lines.append("")
    lines.append("[channel]")
    lines.append(f"snr_db = {_fmt(ch.snr_db)}")
    if ch.distance_m is not None:
        lines.append(f"distance_m = {_fmt(ch.distance_m)}")
        lines.append(f"tx_power_dbm = {_fmt(ch.tx_power_dbm)}")
    elif ch.rx_power_dbm is not None:
        lines.append(f"rx_power_dbm = {_fmt(ch.rx_power_dbm)}")
    if ch.taps:
        lines.append(f"taps = {_format_taps(ch.taps)}")
    lines.append(f"seed = {ch.seed}")
    lines.append("")
    lines.append("[rx]")
    lines += [f"{k} = {_fmt(getattr(rx, k))}" for k in _RX_KEYS]
    try:
        with open(path, "w", newline="") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


# --- PWL waveforms ---

@dataclass(frozen=True)
class PwlWaveform:
    """Piece-wise linear (time, value) pairs with strictly increasing time."""

    times_s: np.ndarray
    values_v: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times_s, dtype=np.float64)
        v = np.asarray(self.values_v, dtype=np.float64)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("times and values must be 1-D arrays of equal length")
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            raise NonMonotoneTime("time column must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise ValueError("PWL rows must be finite")
        object.__setattr__(self, "times_s", t)
        object.__setattr__(self, "values_v", v)

    def __len__(self) -> int:
        return len(self.times_s)


def export_pwl(
    block: IqBlock,
    path,
    mode: str = "baseband_i",
    passband_rate_hz: float | None = None,
) -> None:
    """Write one real waveform column as time,value CSV.

    passband mode synthesizes I(t)cos(2*pi*fc*t) - Q(t)sin(2*pi*fc*t) at the
    requested rate (default 16 samples per carrier cycle) via bandlimited
    interpolation of the envelope.
    """
    if mode not in PWL_MODES:
        raise ValueError(f"mode must be one of {PWL_MODES}")
    if mode == "baseband_i":
        values = block.samples.real
        rate = block.sample_rate_hz
    elif mode == "baseband_q":
        values = block.samples.imag
        rate = block.sample_rate_hz
    else:
        fc = block.center_freq_hz
        if fc <= 0:
            raise ValueError("passband export requires a positive center_freq_hz")
        rate = passband_rate_hz if passband_rate_hz is not None else 16.0 * fc
        min_rate = 4.0 * (fc + block.sample_rate_hz / 2.0)
        if rate < min_rate:
            raise RateTooLow(f"passband rate {rate:g} Hz < required {min_rate:g} Hz")
        n_out = int(round(len(block) * rate / block.sample_rate_hz))
        envelope = resample(block.samples, n_out)
        t = np.arange(n_out) / rate
        values = envelope.real * np.cos(2 * np.pi * fc * t) - envelope.imag * np.sin(2 * np.pi * fc * t)

    times = np.arange(len(values)) / rate
    lines = ["time,value"]
    lines += [f"{t:.8e},{v:.8e}" for t, v in zip(times, values)]
    try:
        with open(path, "w", newline="") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def import_pwl(path) -> PwlWaveform:
    """Read a time,value CSV; a header-only file yields an empty waveform."""
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc

    start = 1 if lines and lines[0].strip().lower().startswith("time") else 0
    times, values = [], []
    for lineno, line in enumerate(lines[start:], start=start + 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"expected 'time,value', got {line!r}", line=lineno)
        try:
            times.append(float(parts[0]))
            values.append(float(parts[1]))
        except ValueError:
            raise ParseError(f"non-numeric row {line!r}", line=lineno) from None
    if not times:
        warnings.warn(f"{path}: no data rows, returning an empty waveform", stacklevel=2)
    return PwlWaveform(np.array(times), np.array(values))


def resample_pwl(wf: PwlWaveform, sample_rate_hz: float) -> np.ndarray:
    """Linear interpolation of a PWL waveform onto a uniform grid."""
    if len(wf) == 0:
        return np.zeros(0)
    n = max(1, int(math.floor((wf.times_s[-1] - wf.times_s[0]) * sample_rate_hz)) + 1)
    grid = wf.times_s[0] + np.arange(n) / sample_rate_hz
    return np.interp(grid, wf.times_s, wf.values_v)


# --- LNA table files ---

def save_lna_table(table: LnaBiasTable, path) -> None:
    lines = ["# rflink lna bias table", f"vdd_v={table.vdd_v!r}",
             "bias_ua,gain_db,nf_db,iip3_dbm,label"]
    for bias, p in table.entries:
        lines.append(f"{bias!r},{p.gain_db!r},{p.nf_db!r},{p.iip3_dbm!r},{p.label}")
    try:
        with open(path, "w", newline="") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_lna_table(path) -> LnaBiasTable:
    try:
        with open(path) as fh:
            lines = [l for l in fh.read().splitlines() if l.strip() and not l.startswith("#")]
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if not lines or not lines[0].startswith("vdd_v="):
        raise ParseError("missing vdd_v header line")
    vdd = float(lines[0].split("=", 1)[1])
    entries = []
    for lineno, line in enumerate(lines[2:], start=3):
        parts = line.split(",")
        if len(parts) != 5:
            raise ParseError("expected bias_ua,gain_db,nf_db,iip3_dbm,label", line=lineno)
        try:
            entries.append((float(parts[0]),
                            RfBlockParams(float(parts[1]), float(parts[2]), float(parts[3]), parts[4])))
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
    try:
        return LnaBiasTable(tuple(entries), vdd)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None


# --- run reports ---

_TABLE_HEADER = (
    f"{'bias_ua':>10} {'power_mw':>10} {'ber':>12} {'ser':>12} "
    f"{'evm_pct':>10} {'mer_db':>8} {'pkt_errs':>8}"
)


def _table_row(r: MetricsReport) -> str:
    return (
        f"{r.bias_ua:>10g} {r.power_mw:>10g} {r.ber:>12.4e} {r.ser:>12.4e} "
        f"{r.evm_rms_pct:>10.3f} {r.mer_db:>8.2f} {r.packet_errors:>8d}"
    )


def _report_kv(r: MetricsReport, prefix: str = "") -> list[str]:
    keys = ("bias_ua", "power_mw", "bit_errors", "bits_total", "ber",
            "symbol_errors", "symbols_total", "ser", "evm_rms_pct", "mer_db",
            "packets_total", "packet_errors", "per")
    return [f"{prefix}{k}={_fmt(getattr(r, k))}" for k in keys]


def emit_report(results, path) -> None:
    """Write key=value lines plus a fixed-width table, highest bias first."""
    lines = ["format=rflink-report-v1"]
    if isinstance(results, MetricsReport):
        lines.append("kind=metrics")
        lines += _report_kv(results)
        reports = [results]
    elif isinstance(results, TunerResult):
        lines.append("kind=tune")
        lines.append(f"chosen_bias_ua={_fmt(results.chosen_bias_ua)}")
        lines.append(f"chosen_power_mw={_fmt(results.chosen_power_mw)}")
        lines.append(f"reduction_factor={_fmt(results.reduction_factor)}")
        reports = list(results.per_setting_reports)
    else:
        reports = list(results)
        lines.append("kind=sweep")
        lines.append(f"settings={len(reports)}")
        for r in sorted(reports, key=lambda r: -r.bias_ua):
            lines += _report_kv(r, prefix=f"setting.{_fmt(r.bias_ua)}.")

    lines.append("")
    lines.append(_TABLE_HEADER)
    for r in sorted(reports, key=lambda r: -r.bias_ua):
        lines.append(_table_row(r))

    if isinstance(results, TunerResult):
        lines.append("")
        lines += [f"trace: {t}" for t in results.decision_trace.splitlines()]

    try:
        with open(path, "w", newline="") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
