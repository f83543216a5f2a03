import numpy as np
import pytest

from timebin.analysis import GateConfig, analyze_stream, car
from timebin.simulate import (CH_IDLER, CH_SIGNAL, CH_TRIGGER,
                              ExperimentConfig, _outcome_table,
                              iter_simulate, iter_simulate_single_bin,
                              joint_slot_distribution, simulate,
                              simulate_no_pump_interferometer)


class TestJointSlotDistribution:
    def test_fringe_maximum(self):
        d = joint_slot_distribution(0.0, np.pi, 0.0, 1.0)
        assert d.joint[1, 1] == pytest.approx(2.0 / 16.0)
        assert d.joint[1, 1] == pytest.approx(4 * d.joint[0, 0])

    def test_fringe_minimum(self):
        d = joint_slot_distribution(0.0, 0.0, 0.0, 1.0)
        assert d.joint[1, 1] == pytest.approx(0.0, abs=1e-15)

    def test_singles_marginal_ratios(self):
        for phases in [(0.0, 0.0, 0.0), (0.3, 1.2, 2.0), (1.0, np.pi, 0.5)]:
            d = joint_slot_distribution(*phases, v0=0.9)
            assert d.marginal[1] == pytest.approx(2 * d.marginal[0])
            assert d.marginal[1] == pytest.approx(2 * d.marginal[2])

    def test_forbidden_corners_and_equal_satellites(self):
        d = joint_slot_distribution(0.4, 1.0, 2.5, 0.8)
        assert d.joint[0, 2] == 0.0
        assert d.joint[2, 0] == 0.0
        sats = [d.joint[s, i] for s, i in
                ((0, 0), (0, 1), (1, 0), (1, 2), (2, 1), (2, 2))]
        assert np.ptp(sats) == 0.0

    def test_rejects_bad_visibility(self):
        with pytest.raises(ValueError):
            joint_slot_distribution(0, 0, 0, 1.5)

    def test_full_outcome_table_normalized(self):
        probs, s_slot, i_slot, s_mon, i_mon = _outcome_table(0.0, 0.7, 0.2, 0.95)
        assert probs.sum() == pytest.approx(1.0)
        assert np.all(probs >= 0)
        # no pair outcome ever lands in the forbidden corner slots
        assert not np.any((s_slot == 0) & (i_slot == 2))
        assert not np.any((s_slot == 2) & (i_slot == 0))

    def test_outcome_table_matches_monitored_joint(self):
        probs, s_slot, i_slot, s_mon, i_mon = _outcome_table(0.1, 2.0, 0.4, 0.9)
        d = joint_slot_distribution(0.1, 2.0, 0.4, 0.9)
        for s in range(3):
            for i in range(3):
                sel = (s_slot == s) & (i_slot == i) & s_mon & i_mon
                assert probs[sel].sum() == pytest.approx(d.joint[s, i])

    def test_outcome_table_matches_singles_marginal(self):
        probs, s_slot, i_slot, s_mon, i_mon = _outcome_table(0.6, 1.1, 2.9, 1.0)
        d = joint_slot_distribution(0.6, 1.1, 2.9, 1.0)
        for s in range(3):
            assert probs[(s_slot == s) & s_mon].sum() == pytest.approx(d.marginal[s])
            assert probs[(i_slot == s) & i_mon].sum() == pytest.approx(d.marginal[s])


class TestConfig:
    def test_defaults_valid(self):
        ExperimentConfig().validate()

    @pytest.mark.parametrize("field,value", [
        ("eta_signal", 1.4), ("eta_idler", -0.1), ("duration", -1.0),
        ("mean_pairs_per_pulse", -0.5), ("interference_visibility", 2.0),
        ("rep_rate", 0.0), ("phi_p", np.inf),
    ])
    def test_rejects_bad_fields(self, field, value):
        with pytest.raises(ValueError):
            ExperimentConfig(**{field: value}).validate()

    def test_rejects_bins_overflowing_period(self):
        with pytest.raises(ValueError):
            ExperimentConfig(bin_delay=6e-9).validate()

    def test_power_scaling(self):
        cfg = ExperimentConfig(pair_yield_per_watt=2.0, pump_power=0.25)
        assert cfg.mu == pytest.approx(0.5)
        assert cfg.with_power(0.5).mu == pytest.approx(1.0)


class TestSimulate:
    def test_no_pairs_no_darks_gives_only_triggers(self):
        cfg = ExperimentConfig(duration=1e-4, mean_pairs_per_pulse=0.0, rng_seed=1)
        tags = simulate(cfg)
        assert np.all(tags["channel"] == CH_TRIGGER)
        assert tags.size == int(round(cfg.duration * cfg.rep_rate))

    def test_one_trigger_per_pulse_period(self):
        cfg = ExperimentConfig(duration=1e-4, mean_pairs_per_pulse=0.2, rng_seed=2)
        tags = simulate(cfg)
        trig = tags[tags["channel"] == CH_TRIGGER]["time_ps"].astype(np.int64)
        period = 1e12 / cfg.rep_rate
        assert trig.size == int(round(cfg.duration * cfg.rep_rate))
        np.testing.assert_array_equal(np.diff(trig) > 0.9 * period, True)

    def test_stream_is_sorted(self):
        cfg = ExperimentConfig(duration=2e-3, mean_pairs_per_pulse=0.1,
                               dark_rate_signal=5e4, dark_rate_idler=5e4, rng_seed=3)
        tags = simulate(cfg)
        t = tags["time_ps"].astype(np.int64)
        assert np.all(np.diff(t) >= 0)

    def test_deterministic_replay(self):
        cfg = ExperimentConfig(duration=1e-3, mean_pairs_per_pulse=0.1,
                               dark_rate_signal=1e4, rng_seed=77)
        a, b = simulate(cfg), simulate(cfg)
        assert a.tobytes() == b.tobytes()

    def test_chunked_equals_whole(self):
        cfg = ExperimentConfig(duration=1e-3, mean_pairs_per_pulse=0.1, rng_seed=5)
        whole = simulate(cfg)
        chunked = np.concatenate(list(iter_simulate(cfg)))
        assert whole.tobytes() == chunked.tobytes()

    def test_rejects_invalid_config_before_output(self):
        with pytest.raises(ValueError):
            simulate(ExperimentConfig(eta_signal=2.0))

    def test_signal_singles_rate_matches_monitored_mass(self):
        # marginal monitored mass is 1/8 + 1/4 + 1/8 = 1/2 per photon
        cfg = ExperimentConfig(duration=0.02, mean_pairs_per_pulse=0.01, rng_seed=6)
        tags = simulate(cfg)
        n_signal = int(np.count_nonzero(tags["channel"] == CH_SIGNAL))
        expected = cfg.rep_rate * cfg.duration * cfg.mu * 0.5
        assert abs(n_signal - expected) < 3 * np.sqrt(expected)

    def test_empirical_joint_matches_distribution(self):
        cfg = ExperimentConfig(duration=0.3, mean_pairs_per_pulse=0.005,
                               phi_s=2.0, phi_i=0.7, phi_p=0.4,
                               interference_visibility=0.85, rng_seed=8)
        res = analyze_stream(iter_simulate(cfg), GateConfig.time_bin(cfg))
        d = joint_slot_distribution(cfg.phi_p, cfg.phi_s, cfg.phi_i,
                                    cfg.interference_visibility)
        n_pairs = cfg.rep_rate * cfg.duration * cfg.mu
        for s in range(3):
            for i in range(3):
                if (s, i) in ((0, 2), (2, 0)):
                    continue  # accidental-only cells, checked separately
                expected = n_pairs * d.joint[s, i]
                sigma = np.sqrt(max(expected, 1.0))
                assert abs(res.joint[s, i] - expected) < 4 * sigma + 4, (s, i)

    def test_corner_slots_accidentals_only(self):
        cfg = ExperimentConfig(duration=0.05, mean_pairs_per_pulse=0.002,
                               phi_s=np.pi, rng_seed=9)
        res = analyze_stream(iter_simulate(cfg), GateConfig.time_bin(cfg))
        # pair-origin coincidences never reach the corners; only the
        # O(mu^2) multi-pair accidentals can, as in the offset-pulse rate
        accidental_scale = res.neighbor_joint.sum() + 1
        assert res.joint[0, 2] + res.joint[2, 0] <= 5 * accidental_scale

    def test_zero_visibility_removes_phase_dependence(self):
        counts = []
        for phi in (0.0, np.pi / 2, np.pi, 4.0):
            cfg = ExperimentConfig(duration=0.01, mean_pairs_per_pulse=0.02,
                                   phi_s=phi, interference_visibility=0.0,
                                   rng_seed=10)
            res = analyze_stream(iter_simulate(cfg), GateConfig.time_bin(cfg))
            counts.append(res.joint[1, 1])
        spread = max(counts) - min(counts)
        assert spread < 3 * np.sqrt(np.mean(counts)) * np.sqrt(2)


class TestSingleBin:
    def test_single_peak_structure(self):
        cfg = ExperimentConfig(duration=5e-3, mean_pairs_per_pulse=0.05, rng_seed=11)
        tags = simulate_no_pump_interferometer(cfg)
        res = analyze_stream(tags, GateConfig.single_bin(cfg))
        # all detections fall in the one configured gate (the 250 ps
        # half-width is 5 jitter sigmas, so allow a stray tag or two)
        n_signal = int(np.count_nonzero(tags["channel"] == CH_SIGNAL))
        assert res.gated_signal.sum() >= n_signal - 2
        assert res.joint.shape == (1, 1)

    def test_car_inverse_mu(self):
        cfg = ExperimentConfig(duration=0.05, mean_pairs_per_pulse=0.001, rng_seed=12)
        res = analyze_stream(iter_simulate_single_bin(cfg),
                             GateConfig.single_bin(cfg))
        value = car(res.rate_report()).value
        assert value == pytest.approx(1000.0, rel=0.10)

    def test_darks_only_car_near_one(self):
        cfg = ExperimentConfig(rep_rate=1e5, duration=0.5,
                               mean_pairs_per_pulse=0.0,
                               dark_rate_signal=2e4, dark_rate_idler=2e4,
                               detection_delay=5e-6, rng_seed=13)
        gates = GateConfig(gate_width=5e-6,
                           offsets={CH_SIGNAL: [5e-6], CH_IDLER: [5e-6]})
        res = analyze_stream(iter_simulate_single_bin(cfg), gates)
        q = car(res.rate_report())
        assert abs(q.value - 1.0) < 3 * q.error
