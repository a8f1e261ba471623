import math

import numpy as np
import pytest
from scipy.special import erfc

from rflink import channel, modem
from rflink.errors import SyncNotFound
from rflink.modem import BPSK, OOK, QPSK, IqBlock, demodulate, map_bits, pulse_shape, synchronize
from rflink.units import dbm_to_vrms

SQRT2 = math.sqrt(2.0)


def qfunc(x: float) -> float:
    return 0.5 * erfc(x / SQRT2)


class TestSchemes:
    @pytest.mark.parametrize("scheme", [BPSK, QPSK, OOK])
    def test_unit_average_energy(self, scheme):
        energy = np.mean(np.abs(scheme.constellation) ** 2)
        assert energy == pytest.approx(1.0, abs=1e-12)

    def test_qpsk_gray_adjacency(self):
        # points one quadrant apart differ in exactly one bit
        pts = QPSK.constellation
        for i in range(4):
            for j in range(i + 1, 4):
                hamming = bin(i ^ j).count("1")
                dist = abs(pts[i] - pts[j])
                if np.isclose(dist, SQRT2):  # adjacent quadrants
                    assert hamming == 1
                else:  # diagonal
                    assert hamming == 2

    def test_qpsk_00_maps_to_first_quadrant(self):
        sym = map_bits(np.array([0, 0], dtype=np.uint8), QPSK)
        assert sym[0] == pytest.approx((1 + 1j) / SQRT2)

    def test_bpsk_antipodal(self):
        sym = map_bits(np.array([0, 1], dtype=np.uint8), BPSK)
        assert sym[0] == pytest.approx(1.0)
        assert sym[1] == pytest.approx(-1.0)

    def test_qpsk_gray_map_exhausts_constellation(self):
        sym = map_bits(np.array([0, 0, 0, 1, 1, 1, 1, 0], dtype=np.uint8), QPSK)
        assert len(set(np.round(sym, 12))) == 4
        assert np.allclose(np.abs(sym), 1.0)

    def test_odd_bit_count_pads(self, caplog):
        with caplog.at_level("WARNING"):
            sym = map_bits(np.array([1, 0, 1], dtype=np.uint8), QPSK)
        assert len(sym) == 2
        assert "padding" in caplog.text


class TestIqBlock:
    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            IqBlock(np.array([1.0, np.nan]), 1e6)

    def test_rejects_nonpositive_rate(self):
        with pytest.raises(ValueError):
            IqBlock(np.ones(4, dtype=complex), 0.0)

    def test_samples_are_immutable(self):
        blk = IqBlock(np.ones(4, dtype=complex), 1e6)
        with pytest.raises(ValueError):
            blk.samples[0] = 0


class TestPulseShape:
    def test_single_symbol_block(self):
        blk = pulse_shape(np.array([(1 + 1j) / SQRT2]), sps=8)
        assert len(blk) == 8 * (1 + 2 * modem.FILTER_SPAN_SYMBOLS)
        assert np.argmax(np.abs(blk.samples)) == 64  # symbol centre

    def test_identical_symbols_give_constant_envelope(self):
        blk = pulse_shape(np.full(64, 1 + 0j), sps=8)
        steady = np.abs(blk.samples[16 * 8:-16 * 8])
        assert np.max(steady) / np.min(steady) < 1.01

    def test_rms_for_minus_100_dbm(self):
        amp = dbm_to_vrms(-100.0)
        assert amp == pytest.approx(2.236e-6, rel=1e-3)
        sym = map_bits(np.random.default_rng(3).integers(0, 2, 2000).astype(np.uint8), QPSK)
        blk = pulse_shape(sym, amplitude_scale=amp)
        rms = np.sqrt(np.mean(np.abs(blk.samples) ** 2))
        assert rms == pytest.approx(amp, rel=1e-12)

    def test_rolloff_bounds(self):
        with pytest.raises(ValueError):
            pulse_shape(np.ones(4, dtype=complex), rolloff=1.5)
        with pytest.raises(ValueError):
            pulse_shape(np.ones(4, dtype=complex), sps=1)


class TestLoopback:
    @pytest.mark.parametrize("scheme", [BPSK, QPSK, OOK])
    @pytest.mark.parametrize("n_bits", [64, 1000])
    def test_bits_recovered_exactly(self, scheme, n_bits, rng):
        bits = rng.integers(0, 2, n_bits).astype(np.uint8)
        sym = map_bits(bits, scheme)
        blk = pulse_shape(sym, sps=8)
        out, _ = demodulate(blk, scheme, sps=8, n_symbols=len(sym))
        assert np.array_equal(out[:n_bits], bits)

    def test_noiseless_records_hit_reference_points(self, rng):
        bits = rng.integers(0, 2, 2000).astype(np.uint8)
        sym = map_bits(bits, QPSK)
        blk = pulse_shape(sym, sps=8)
        _, records = demodulate(blk, QPSK, sps=8, n_symbols=len(sym))
        worst = max(abs(r.rx - r.ref) for r in records)
        assert worst < 1e-6

    def test_rotation_equivariance(self, rng):
        bits = rng.integers(0, 2, 600).astype(np.uint8)
        sym = map_bits(bits, QPSK)
        blk = pulse_shape(sym, sps=8)
        for theta in np.linspace(0.0, 2 * np.pi, 9):
            rotated = blk.with_samples(blk.samples * np.exp(1j * theta))
            out, _ = demodulate(rotated, QPSK, sps=8, phase=theta, n_symbols=len(sym))
            assert np.array_equal(out[:600], bits), f"theta={theta}"

    def test_boxcar_filter_loopback(self, rng):
        bits = rng.integers(0, 2, 1000).astype(np.uint8)
        sym = map_bits(bits, QPSK)
        blk = pulse_shape(sym, sps=8)
        out, _ = demodulate(blk, QPSK, sps=8, n_symbols=len(sym), symbol_filter="boxcar")
        assert np.array_equal(out[:1000], bits)

    def test_nearest_neighbour_slicing(self):
        idx = modem.slice_symbols(np.array([0.9 + 0.1j]), QPSK)
        bits = modem.bits_from_indices(idx, QPSK)
        assert np.array_equal(bits, [0, 0])  # (+,+) quadrant


class TestSynchronize:
    def _frame_block(self, rng, prepend=0, rotate=0.0, snr_db=None):
        preamble = np.unpackbits(np.frombuffer(b"\xa9\x45\x3c\x77\x12\xee\x08\x5b", dtype=np.uint8))
        body = rng.integers(0, 2, 800).astype(np.uint8)
        sym = map_bits(np.concatenate([preamble, body]), QPSK)
        blk = pulse_shape(sym, sps=8)
        samples = blk.samples * np.exp(1j * rotate)
        if prepend:
            samples = np.concatenate([np.zeros(prepend, dtype=complex), samples])
        blk = IqBlock(samples, blk.sample_rate_hz)
        if snr_db is not None:
            blk = channel.apply_awgn(blk, snr_db, np.random.default_rng(5), occupied_bw_hz=84375.0)
        return blk, preamble

    def test_known_delay(self, rng):
        blk, preamble = self._frame_block(rng, prepend=17)
        offset, phase = synchronize(blk, preamble, QPSK, sps=8)
        assert offset == 17
        assert abs(phase) < 1e-3  # only neighbouring-symbol tails perturb it

    def test_rotated_phase_estimate_at_20db(self, rng):
        blk, preamble = self._frame_block(rng, rotate=np.pi / 2, snr_db=20.0)
        offset, phase = synchronize(blk, preamble, QPSK, sps=8)
        assert offset == 0
        assert abs(phase - np.pi / 2) < 0.05

    def test_pure_noise_raises(self, rng):
        noise = (rng.normal(size=10000) + 1j * rng.normal(size=10000)) / SQRT2
        preamble = rng.integers(0, 2, 64).astype(np.uint8)
        with pytest.raises(SyncNotFound):
            synchronize(IqBlock(noise, 5e5), preamble, QPSK, sps=8)


class TestTheoreticalBer:
    def test_qpsk_matches_q_function_at_es_n0_10db(self):
        # spec anchor: Es/N0 = 10 dB -> BER = Q(sqrt(10)) ~ 7.8e-4
        rolloff = 0.35
        n_bits = 120_000
        bits = np.random.default_rng(21).integers(0, 2, n_bits).astype(np.uint8)
        sym = map_bits(bits, QPSK)
        blk = pulse_shape(sym, sps=8, rolloff=rolloff)
        snr_db = 10.0 - 10 * math.log10(1 + rolloff)
        noisy = channel.apply_awgn(
            blk, snr_db, np.random.default_rng(22), occupied_bw_hz=62500 * (1 + rolloff)
        )
        out, _ = demodulate(noisy, QPSK, sps=8, n_symbols=len(sym))
        ber = np.mean(out[:n_bits] != bits)
        theory = qfunc(math.sqrt(10.0))
        sigma = math.sqrt(theory * (1 - theory) / n_bits)
        assert abs(ber - theory) < 3 * sigma
