"""End-to-end link trials over the LNA bias ladder and minimum-power
selection against an application target.

Sweeps run from the lowest-power setting upward: with a monotone ladder the
first feasible setting is the optimum, so the sweep exits early. Trial seeds
derive from (master_seed, setting_index, trial_index), which keeps results
independent of worker scheduling.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm, t as student_t

from . import channel as chan
from . import framing, metrics, modem, rfchain
from .errors import NoFeasibleSetting, SyncNotFound
from .rfchain import DEFAULT_LNA_TABLE, LnaBiasTable
from .scenario import Scenario
from .units import dbm_to_vrms

TARGET_METRICS = ("ber", "per", "mer")


@dataclass(frozen=True)
class TunerPolicy:
    """Feasibility rule for one application target.

    Rate targets (ber/per) pass when the one-sided Wilson upper bound at
    the given confidence stays at or below the threshold; a zero-rate
    target passes only with zero observed errors over the whole packet
    budget (no interval can certify rate 0). MER targets pass when the
    one-sided Student-t lower bound on per-trial MER clears the threshold.
    """

    target_metric: str
    threshold: float
    confidence: float = 0.95
    min_bits: int = 10_000
    max_packets: int = 200

    def __post_init__(self):
        if self.target_metric not in TARGET_METRICS:
            raise ValueError(f"target_metric must be one of {TARGET_METRICS}")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must lie in (0, 1)")
        if self.target_metric == "ber" and self.threshold > 0:
            if self.min_bits < 10.0 / self.threshold:
                raise ValueError(
                    f"min_bits={self.min_bits} cannot resolve a BER threshold of "
                    f"{self.threshold:g}; need at least {math.ceil(10.0 / self.threshold)}"
                )


@dataclass(frozen=True)
class TunerResult:
    chosen_bias_ua: float
    chosen_power_mw: float
    reduction_factor: float
    per_setting_reports: tuple[metrics.MetricsReport, ...]
    decision_trace: str


def power_mw(table: LnaBiasTable, bias_ua: float) -> float:
    """Supply power of a ladder setting: bias * Vdd (linear, zero intercept)."""
    return table.power_mw(bias_ua)


def _tx_amplitude_vrms(scenario: Scenario) -> float:
    ch = scenario.channel
    if ch.tx_power_dbm is not None:
        return dbm_to_vrms(ch.tx_power_dbm)
    if ch.rx_power_dbm is not None:
        return dbm_to_vrms(ch.rx_power_dbm)
    return 1.0


def _run_packet(
    scenario: Scenario,
    lna: rfchain.RfBlockParams,
    seed: int,
    packet_index: int,
    capture: dict | None = None,
):
    """One packet through framing -> modem -> channel -> front-end -> modem.

    Returns (tx_bits, rx_bits, rx_points, tx_symbols, parsed_or_None).
    """
    wf, rx = scenario.waveform, scenario.rx
    scheme = modem.scheme_by_name(wf.modulation)

    payload = chan.derive_rng(seed, packet_index, 0).bytes(wf.payload_bytes)
    frame = framing.build_frame(payload, framing.CODE_FOR_MODULATION[wf.modulation])
    tx_bits = framing.serialize_frame(frame)
    tx_syms = modem.map_bits(tx_bits, scheme)
    tx_blk = modem.pulse_shape(
        tx_syms, wf.sps, wf.rolloff, _tx_amplitude_vrms(scenario),
        wf.symbol_rate_hz, wf.carrier_hz,
    )

    ch_blk = chan.apply_channel(
        tx_blk, scenario.channel, chan.derive_rng(seed, packet_index, 1), wf.occupied_bw_hz
    )

    fs = wf.sample_rate_hz
    lna_blk = rfchain.apply_block(ch_blk, lna, fs, chan.derive_rng(seed, packet_index, 2))
    mix_blk = rfchain.apply_mixer(lna_blk, rx.mixer_params, fs, chan.derive_rng(seed, packet_index, 3))
    lpf_blk = rfchain.apply_lpf(mix_blk, rx.lpf)

    if capture is not None:
        capture.update({
            "tx": tx_blk, "post-channel": ch_blk, "post-lna": lna_blk,
            "post-mixer": mix_blk, "post-lpf": lpf_blk,
        })

    preamble_bits = np.unpackbits(np.frombuffer(framing.PREAMBLE, dtype=np.uint8))
    try:
        offset, phase = modem.synchronize(lpf_blk, preamble_bits, scheme, wf.sps, wf.rolloff)
    except SyncNotFound:
        return tx_bits, None, None, tx_syms, None

    rx_bits, rx_points, _ = modem.demodulate_points(
        lpf_blk, scheme, wf.sps, offset, phase,
        n_symbols=len(tx_syms), symbol_filter=rx.symbol_filter, rolloff=wf.rolloff,
    )
    parsed = framing.parse_frame_lenient(rx_bits[:len(tx_bits)])
    return tx_bits, rx_bits[:len(tx_bits)], rx_points, tx_syms, parsed


def run_trial(
    scenario: Scenario,
    bias_ua: float,
    seed: int | None = None,
    table: LnaBiasTable | None = None,
) -> metrics.MetricsReport:
    """Score one burst of scenario.packets packets at the given bias.

    Deterministic for a fixed (scenario, bias_ua, seed) triple. A packet
    that fails synchronization counts as a packet error and contributes no
    bit or symbol statistics.
    """
    table = table if table is not None else DEFAULT_LNA_TABLE
    seed = scenario.seed if seed is None else seed
    lna = rfchain.lna_params(table, bias_ua)
    scheme = modem.scheme_by_name(scenario.waveform.modulation)
    bps = scheme.bits_per_symbol

    bit_errors = bits_total = 0
    symbol_errors = symbols_total = 0
    err_energy = ref_energy = 0.0
    packet_errors = 0

    for p in range(scenario.waveform.packets):
        tx_bits, rx_bits, rx_points, tx_syms, parsed = _run_packet(scenario, lna, seed, p)
        if rx_bits is None:
            packet_errors += 1
            continue
        diff = rx_bits != tx_bits
        bit_errors += int(np.sum(diff))
        bits_total += len(tx_bits)
        sym_diff = diff[:len(tx_syms) * bps].reshape(-1, bps).any(axis=1)
        symbol_errors += int(np.sum(sym_diff))
        symbols_total += len(tx_syms)
        e, r = metrics.truth_energies(rx_points, tx_syms)
        err_energy += e
        ref_energy += r
        packet_errors += int(parsed.packet_error)

    return metrics.build_report(
        bit_errors, bits_total, symbol_errors, symbols_total,
        err_energy, ref_energy, packet_errors, scenario.waveform.packets,
        bias_ua=bias_ua, power_mw=table.power_mw(bias_ua),
    )


def run_trial_records(
    scenario: Scenario,
    bias_ua: float,
    seed: int | None = None,
    table: LnaBiasTable | None = None,
) -> tuple[metrics.MetricsReport, list[modem.SymbolRecord]]:
    """run_trial plus the burst's symbol records (for constellation export).

    Record indices run consecutively across packets; packets that lost
    synchronization contribute no records.
    """
    table = table if table is not None else DEFAULT_LNA_TABLE
    seed = scenario.seed if seed is None else seed
    lna = rfchain.lna_params(table, bias_ua)
    records: list[modem.SymbolRecord] = []
    for p in range(scenario.waveform.packets):
        _, rx_bits, rx_points, tx_syms, _ = _run_packet(scenario, lna, seed, p)
        if rx_bits is None:
            continue
        records.extend(metrics.records_with_truth(rx_points, tx_syms, index_offset=len(records)))
    return run_trial(scenario, bias_ua, seed, table), records


def capture_stages(
    scenario: Scenario,
    bias_ua: float,
    seed: int | None = None,
    table: LnaBiasTable | None = None,
) -> dict[str, modem.IqBlock]:
    """Waveforms of the first packet at each pipeline stage (for export)."""
    table = table if table is not None else DEFAULT_LNA_TABLE
    seed = scenario.seed if seed is None else seed
    stages: dict[str, modem.IqBlock] = {}
    _run_packet(scenario, rfchain.lna_params(table, bias_ua), seed, 0, capture=stages)
    return stages


def _run_trials(
    scenario: Scenario,
    bias_ua: float,
    seeds: list[list[int]],
    table: LnaBiasTable,
    workers: int = 1,
) -> list[metrics.MetricsReport]:
    if workers <= 1 or len(seeds) <= 1:
        return [run_trial(scenario, bias_ua, s, table) for s in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_trial, scenario, bias_ua, s, table) for s in seeds]
        return [f.result() for f in futures]  # fixed order regardless of completion


def average_mer_db(
    scenario: Scenario,
    bias_ua: float,
    table: LnaBiasTable,
    n_packets: int,
    seed: int,
    workers: int = 1,
) -> float:
    """Pooled MER over at least n_packets packets (sum-form merge)."""
    n_trials = max(1, math.ceil(n_packets / scenario.waveform.packets))
    seeds = [[seed, t] for t in range(n_trials)]
    reports = _run_trials(scenario, bias_ua, seeds, table, workers)
    return metrics.merge_reports(reports).mer_db


def wilson_upper(errors: int, total: int, confidence: float) -> float:
    """One-sided Wilson score upper bound on a binomial rate."""
    if total == 0:
        return 1.0
    z = float(norm.ppf(confidence))
    p = errors / total
    denom = 1.0 + z * z / total
    center = p + z * z / (2 * total)
    radius = z * math.sqrt(p * (1.0 - p) / total + z * z / (4.0 * total * total))
    return min(1.0, (center + radius) / denom)


def _mer_lower_bound(per_trial_mer: list[float], confidence: float) -> float:
    vals = np.array([m for m in per_trial_mer if math.isfinite(m)])
    if len(vals) < len(per_trial_mer):  # perfect trials push the bound up
        vals = np.array(per_trial_mer)
        return math.inf if np.all(np.isinf(vals)) else float(np.min(vals))
    n = len(vals)
    if n < 2:
        return float(vals[0]) if n else -math.inf
    tq = float(student_t.ppf(confidence, n - 1))
    return float(np.mean(vals) - tq * np.std(vals, ddof=1) / math.sqrt(n))


def select_min_power(
    scenario: Scenario,
    policy: TunerPolicy,
    table: LnaBiasTable | None = None,
    seed: int | None = None,
    workers: int = 1,
) -> TunerResult:
    """Lowest-power ladder setting meeting the policy target.

    Settings are evaluated from lowest to highest power; the first feasible
    one wins (optimal under the monotone ladder). Raises NoFeasibleSetting
    when the whole ladder fails.
    """
    table = table if table is not None else DEFAULT_LNA_TABLE
    seed = scenario.seed if seed is None else seed
    bits_per_trial = scenario.bits_per_trial()
    packets_per_trial = scenario.waveform.packets

    trace: list[str] = []
    reports: list[metrics.MetricsReport] = []
    max_power = table.power_mw(table.biases_ua[-1])

    for si, bias in enumerate(table.biases_ua):
        if policy.target_metric == "ber":
            n_trials = max(1, math.ceil(policy.min_bits / bits_per_trial))
        elif policy.target_metric == "per":
            n_trials = max(1, math.ceil(policy.max_packets / packets_per_trial))
        else:
            n_trials = max(10, math.ceil(policy.max_packets / packets_per_trial))

        seeds = [[seed, si, ti] for ti in range(n_trials)]
        trial_reports = _run_trials(scenario, bias, seeds, table, workers)
        merged = metrics.merge_reports(trial_reports)
        reports.append(merged)

        if policy.target_metric == "ber":
            bound = wilson_upper(merged.bit_errors, merged.bits_total, policy.confidence)
            feasible = bound <= policy.threshold
            trace.append(
                f"{bias:g} uA: ber={merged.ber:.3e} over {merged.bits_total} bits, "
                f"wilson_upper={bound:.3e} vs {policy.threshold:g} -> "
                f"{'PASS' if feasible else 'fail'}"
            )
        elif policy.target_metric == "per":
            if policy.threshold <= 0.0:
                feasible = merged.packet_errors == 0
                trace.append(
                    f"{bias:g} uA: {merged.packet_errors}/{merged.packets_total} packet "
                    f"errors; zero-rate target needs a clean run -> "
                    f"{'PASS (not statistically certifiable)' if feasible else 'fail'}"
                )
            else:
                bound = wilson_upper(merged.packet_errors, merged.packets_total, policy.confidence)
                feasible = bound <= policy.threshold
                trace.append(
                    f"{bias:g} uA: per={merged.per:.3e} over {merged.packets_total} packets, "
                    f"wilson_upper={bound:.3e} vs {policy.threshold:g} -> "
                    f"{'PASS' if feasible else 'fail'}"
                )
        else:
            bound = _mer_lower_bound([r.mer_db for r in trial_reports], policy.confidence)
            feasible = bound >= policy.threshold
            trace.append(
                f"{bias:g} uA: mer={merged.mer_db:.2f} dB over {len(trial_reports)} trials, "
                f"t_lower={bound:.2f} vs {policy.threshold:g} -> "
                f"{'PASS' if feasible else 'fail'}"
            )

        if feasible:
            chosen_power = table.power_mw(bias)
            trace.append(
                f"selected {bias:g} uA ({chosen_power:g} mW), reduction factor "
                f"{max_power / chosen_power:g} vs the top of the ladder"
            )
            return TunerResult(
                chosen_bias_ua=bias,
                chosen_power_mw=chosen_power,
                reduction_factor=max_power / chosen_power,
                per_setting_reports=tuple(reports),
                decision_trace="\n".join(trace),
            )

    raise NoFeasibleSetting(
        "no ladder setting meets the target:\n" + "\n".join(trace)
    )
