import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdcsim import counting as ct
from pdcsim.components import ComponentChain, OpticalElement
from pdcsim.counting import CountRecord, DetectorModel, EstimateError, ExperimentConfig, SourceState

PERFECT = DetectorModel()


def lossy_chain(t):
    return ComponentChain((OpticalElement("loss", t, t),))


class PoissonSource:
    """Poissonian pair number; the many-mode limit of the thermal source."""

    def __init__(self, mean):
        self.mean = mean

    def sample_total_pairs(self, rng, size):
        return rng.poisson(self.mean, size)


class ExactlyOnePair:
    """Every pulse carries exactly one pair."""

    def sample_total_pairs(self, rng, size):
        return np.ones(size, dtype=np.int64)


def geometric_moments(n, kmax=200):
    k = np.arange(kmax)
    p = n**k / (1 + n) ** (k + 1)
    mean = np.sum(k * p)
    var = np.sum((k - mean) ** 2 * p)
    mu4 = np.sum((k - mean) ** 4 * p)
    return mean, var, mu4


# --- source ------------------------------------------------------------------------


def test_amplitudes_normalized_and_means_sum():
    s = SourceState(np.array([3.0, 4.0]), 0.01)
    assert np.sum(s.schmidt_amplitudes**2) == pytest.approx(1.0)
    assert s.mode_means.sum() == pytest.approx(0.01)
    assert s.mode_means == pytest.approx([0.0036, 0.0064])


@pytest.mark.parametrize("amps, mean", [(np.zeros(3), 0.1), (np.ones(2), 0.0), (np.ones(2), -1.0)])
def test_source_invariants(amps, mean):
    with pytest.raises(ValueError):
        SourceState(amps, mean)


def test_zero_weight_modes_never_populated():
    s = SourceState(np.array([1.0, 0.0, 0.0]), 0.5)
    rng = np.random.default_rng(1)
    draws = np.array([s.sample_pulse(rng) for _ in range(2000)])
    assert np.all(draws[:, 1:] == 0)
    assert draws.shape == (2000, 3)


def test_vanishing_mean_draws_vacuum():
    s = SourceState(np.ones(4), 1e-300)
    rng = np.random.default_rng(2)
    assert np.all(s.sample_pulse(rng) == 0)
    assert np.all(s.sample_total_pairs(rng, 10_000) == 0)


def test_single_mode_thermal_moments():
    n, N = 0.1, 10_000_000
    draws = SourceState.equal_modes(1, n).sample_total_pairs(np.random.default_rng(3), N)
    mean, var, mu4 = geometric_moments(n)
    assert abs(draws.mean() - n) < 4 * np.sqrt(var / N)
    assert abs(draws.var() - n * (1 + n)) < 4 * np.sqrt((mu4 - var**2) / N)


def test_two_mode_fano_factor():
    n, N = 0.1, 10_000_000
    draws = SourceState.equal_modes(2, n).sample_total_pairs(np.random.default_rng(4), N)
    fano = draws.var() / draws.mean()
    assert 1.0 < fano < 1.1
    # delta method for var/mean; two independent geometric modes of mean n/2
    mean_k, var_k, mu4_k = geometric_moments(n / 2)
    mu4 = 2 * mu4_k + 6 * var_k**2
    sigma = np.sqrt((mu4 - (2 * var_k) ** 2) / N) / n
    assert abs(fano - (1 + n * 0.5)) < 4 * sigma


def test_exact_sampler_matches_multimode_moments():
    state = SourceState(np.array([0.8, 0.5, 0.3, 0.1]), 0.3)
    N = 4_000_000
    draws = state.sample_total_pairs(np.random.default_rng(5), N)
    n = state.mode_means
    var = np.sum(n * (1 + n))
    assert abs(draws.mean() - n.sum()) < 4 * np.sqrt(var / N)
    p0 = np.prod(1 / (1 + n))
    assert abs(np.mean(draws == 0) - p0) < 4 * np.sqrt(p0 * (1 - p0) / N)


def test_per_mode_sampler_mean():
    state = SourceState(np.array([0.9, 0.4]), 0.2)
    rng = np.random.default_rng(6)
    draws = np.array([state.sample_pulse(rng) for _ in range(100_000)])
    np.testing.assert_allclose(draws.mean(axis=0), state.mode_means, rtol=0.05)


# --- validation -------------------------------------------------------------------------


@pytest.mark.parametrize(
    "kwargs",
    [dict(pulses=0), dict(pulses=10.5), dict(splitter_ratio=0.0), dict(splitter_ratio=1.0), dict(topology="hbt"), dict(pump_power_mw=0.0)],
)
def test_experiment_config_invariants(kwargs):
    with pytest.raises(ValueError):
        ExperimentConfig(**kwargs)


def test_integral_float_pulse_count_accepted():
    cfg = ExperimentConfig(pulses=1e6)
    assert cfg.pulses == 1_000_000 and isinstance(cfg.pulses, int)


@pytest.mark.parametrize(
    "kwargs", [dict(efficiency=1.2), dict(background_click_probability=-0.1), dict(number_resolving=True)]
)
def test_detector_invariants(kwargs):
    with pytest.raises(ValueError):
        DetectorModel(**kwargs)


def test_wrong_detector_count():
    cfg = ExperimentConfig(topology="heralded_g2", pulses=10)
    with pytest.raises(ValueError, match="needs 3 detectors"):
        ct.run_experiment(cfg, SourceState.equal_modes(1, 0.1), [PERFECT, PERFECT])


# --- records --------------------------------------------------------------------------


def record(**kw):
    base = dict(
        topology="direct",
        singles={"d1": 1000, "d2": 900},
        coincidences={"d1d2": 462},
        triples=0,
        pulses=10_000,
        integration_time_s=0.01,
        pump_power_mw=1.0,
    )
    base.update(kw)
    return CountRecord(**base)


@pytest.mark.parametrize(
    "kw",
    [
        dict(coincidences={"d1d2": 950}),
        dict(singles={"d1": 20_000, "d2": 900}),
        dict(
            topology="heralded_g2",
            singles={"d1": 10, "d2": 10, "d3": 10},
            coincidences={"d1d2": 1, "d1d3": 5, "d2d3": 5},
            triples=2,
        ),
    ],
)
def test_record_invariants(kw):
    with pytest.raises(ValueError):
        record(**kw)


def test_record_json_round_trip():
    r = record()
    flat = r.to_dict()
    assert set(flat) == {
        "topology", "singles.d1", "singles.d2", "coinc.d1d2", "triples", "pulses", "integration_time_s", "pump_power_mw"
    }
    assert CountRecord.from_json(r.to_json()) == r


def test_record_merge_sums_fields():
    a, b = record(), record(singles={"d1": 10, "d2": 20}, coincidences={"d1d2": 5})
    m = a + b
    assert m.singles == {"d1": 1010, "d2": 920}
    assert m.coincidences == {"d1d2": 467}
    assert m.pulses == 20_000
    assert m.integration_time_s == pytest.approx(0.02)
    assert a + b == b + a


def test_merge_rejects_mismatched_records():
    with pytest.raises(ValueError):
        record() + record(pump_power_mw=2.0)
    with pytest.raises(ValueError):
        record() + CountRecord("signal_splitter_g2", {"d1": 1, "d2": 1}, {"d1d2": 0}, 0, 10, 1.0, 1.0)


# --- run_experiment ---------------------------------------------------------------------


def test_lossless_direct_heralding_is_exactly_one():
    cfg = ExperimentConfig(topology="direct", pulses=1_000_000, seed=1)
    r = ct.run_experiment(cfg, SourceState.equal_modes(1, 0.01), PERFECT)
    assert r.singles["d1"] > 0
    assert ct.heralding_efficiency(r) == 1.0


def test_same_seed_is_bit_identical_and_worker_independent():
    cfg = ExperimentConfig(topology="heralded_g2", pulses=3 * ct.BLOCK_SIZE + 17, seed=99)
    state = SourceState.equal_modes(3, 0.05)
    a = ct.run_experiment(cfg, state, PERFECT)
    b = ct.run_experiment(cfg, state, PERFECT, workers=4)
    assert a.to_json() == b.to_json()
    c = ct.run_experiment(dataclasses.replace(cfg, seed=100), state, PERFECT)
    assert c != a


def test_integration_time_from_repetition_rate():
    cfg = ExperimentConfig(pulses=2_000_000, repetition_rate_hz=1e6, pump_power_mw=0.5)
    r = ct.run_experiment(cfg, SourceState.equal_modes(1, 0.01), PERFECT)
    assert r.integration_time_s == 2.0
    assert r.pump_power_mw == 0.5
    assert r.pulses == 2_000_000


def test_heralding_matches_chain_product():
    eta_i, det = 0.586, 0.85
    cfg = ExperimentConfig(pulses=10_000_000, seed=5, idler_chain=lossy_chain(eta_i), signal_chain=lossy_chain(0.58))
    r = ct.run_experiment(cfg, SourceState.equal_modes(2, 0.01), DetectorModel(det))
    eta = ct.heralding_efficiency(r)
    assert abs(eta - eta_i * det) < 3 * ct.heralding_efficiency_sigma(r)


def test_monte_carlo_agrees_with_analytic_click_probabilities():
    cfg = ExperimentConfig(
        topology="heralded_g2", pulses=4_000_000, seed=8, signal_chain=lossy_chain(0.6), idler_chain=lossy_chain(0.7),
        splitter_ratio=0.4,
    )
    state = SourceState(np.array([0.9, 0.4, 0.2]), 0.1)
    dets = [DetectorModel(0.8, 1e-3), DetectorModel(0.9, 2e-3), DetectorModel(0.85, 5e-4)]
    r = ct.run_experiment(cfg, state, dets)
    expected = ct.expected_click_probabilities(cfg, state.mode_means, dets)
    for key, value in r.to_dict().items():
        if key.startswith(("singles.", "coinc.")) or key == "triples":
            p = expected[key]
            assert abs(value - p * cfg.pulses) < 4 * np.sqrt(cfg.pulses * p * (1 - p)), key


def test_background_calibration_hits_fraction():
    p = 0.004
    b = ct.background_probability_for_fraction(0.0913, p)
    total = p + b - p * b
    assert b / total == pytest.approx(0.0913)
    assert ct.background_probability_for_fraction(0.0, p) == 0.0
    with pytest.raises(ValueError):
        ct.background_probability_for_fraction(1.0, p)


def test_calibrated_detectors_per_topology():
    cfg = ExperimentConfig(topology="signal_splitter_g2", splitter_ratio=0.3, signal_chain=lossy_chain(0.5))
    state = SourceState.equal_modes(2, 0.01)
    dets = ct.calibrated_detectors(cfg, state.mode_means, {"signal": 0.85, "idler": 0.85}, 0.1)
    assert len(dets) == 2
    # the weaker splitter port needs less background for the same fraction
    assert dets[0].background_click_probability < dets[1].background_click_probability
    probs = ct.photon_click_probabilities(cfg, state.mode_means, {"signal": 0.85, "idler": 0.85})
    for d, p in zip(dets, probs):
        b = d.background_click_probability
        assert b / (p + b - p * b) == pytest.approx(0.1)


# --- estimators -------------------------------------------------------------------------


def test_heralding_examples():
    assert ct.heralding_efficiency(record(singles={"d1": 1000, "d2": 1000}, coincidences={"d1d2": 1000})) == 1.0
    assert ct.heralding_efficiency(record()) == pytest.approx(0.462)
    with pytest.raises(EstimateError):
        ct.heralding_efficiency(record(singles={"d1": 0, "d2": 900}, coincidences={"d1d2": 0}))


def test_estimators_check_topology():
    with pytest.raises(ValueError, match="needs a 'signal_splitter_g2' record"):
        ct.unheralded_g2(record())


@pytest.mark.parametrize("raw, det, expected", [(0.462, 0.85, 0.5435), (0.37, 1.0, 0.37), (0.5, 0.5, 1.0)])
def test_corrected_heralding(raw, det, expected):
    assert ct.corrected_heralding(raw, det) == pytest.approx(expected, abs=1e-4)


def test_corrected_heralding_rejects_zero_efficiency():
    with pytest.raises(ValueError):
        ct.corrected_heralding(0.4, 0.0)


@pytest.mark.parametrize("K", [1, 2, 5])
def test_unheralded_g2_law(K):
    cfg = ExperimentConfig(topology="signal_splitter_g2", pulses=10_000_000, seed=10 + K)
    r = ct.run_experiment(cfg, SourceState.equal_modes(K, 0.01), PERFECT)
    assert abs(ct.unheralded_g2(r) - (1 + 1 / K)) < 3 * ct.unheralded_g2_sigma(r)


def test_multimode_state_with_purity_066():
    # two modes with r1^4 + r2^4 = 0.66
    w1 = 0.5 + np.sqrt(0.66 / 2 - 0.25)
    state = SourceState(np.sqrt([w1, 1 - w1]), 0.01)
    assert state.purity == pytest.approx(0.66)
    cfg = ExperimentConfig(topology="signal_splitter_g2", pulses=10_000_000, seed=21)
    r = ct.run_experiment(cfg, state, PERFECT)
    assert abs(ct.unheralded_g2(r) - 1.66) < 3 * ct.unheralded_g2_sigma(r)


def test_poissonian_stub_g2_is_one():
    cfg = ExperimentConfig(topology="signal_splitter_g2", pulses=10_000_000, seed=22)
    r = ct.run_experiment(cfg, PoissonSource(0.01), PERFECT)
    assert abs(ct.unheralded_g2(r) - 1.0) < 3 * ct.unheralded_g2_sigma(r)


def test_unheralded_g2_needs_counts():
    r = CountRecord("signal_splitter_g2", {"d1": 0, "d2": 5}, {"d1d2": 0}, 0, 100, 1.0, 1.0)
    with pytest.raises(EstimateError):
        ct.unheralded_g2(r)


def test_background_correction_examples():
    assert ct.background_corrected_g2(1.37, 0.0) == 1.37
    assert ct.background_corrected_g2(1.37, 0.0913) == pytest.approx(1.448, abs=5e-4)
    with pytest.raises(ValueError):
        ct.background_corrected_g2(1.37, 1.0)
    with pytest.raises(ValueError):
        ct.background_corrected_g2(0.9, 0.1)
    with pytest.raises(ValueError, match="unknown convention"):
        ct.background_corrected_g2(1.37, 0.1, convention="guess")


def test_background_correction_recovers_clean_g2():
    state = SourceState.equal_modes(1, 0.01)
    cfg = ExperimentConfig(topology="signal_splitter_g2", pulses=10_000_000, seed=23)
    frac = 0.2
    dets = ct.calibrated_detectors(cfg, state.mode_means, {"signal": 1.0, "idler": 1.0}, frac)
    r = ct.run_experiment(cfg, state, dets)
    raw = ct.unheralded_g2(r)
    corrected = ct.background_corrected_g2(raw, frac)
    sigma = ct.unheralded_g2_sigma(r) / (1 - frac) ** 2
    assert raw < 1.9
    assert abs(corrected - 2.0) < 3 * sigma


def test_heralded_g2_of_exact_single_pairs_is_zero():
    cfg = ExperimentConfig(topology="heralded_g2", pulses=200_000, seed=3)
    r = ct.run_experiment(cfg, ExactlyOnePair(), PERFECT)
    assert r.triples == 0
    assert ct.heralded_g2(r) == 0.0


@pytest.mark.parametrize("case_index", [0, 1, 2])
def test_heralded_g2_matches_fock_oracle(fock_oracle, case_index):
    case = fock_oracle["cases"][case_index]
    cfg = ExperimentConfig(
        topology="heralded_g2", pulses=4_000_000, seed=30 + case_index,
        signal_chain=lossy_chain(case["eta_s"]), idler_chain=lossy_chain(case["eta_i"]), splitter_ratio=case["ratio"],
    )
    state = SourceState.equal_modes(1, case["mean"])
    r = ct.run_experiment(cfg, state, PERFECT)
    assert abs(ct.heralded_g2(r) - case["heralded_g2"]) < 3 * ct.heralded_g2_sigma(r)
    # the oracle truncates at 3 pairs; the dropped 4-pair terms are O(n^2) relative
    p = ct.expected_click_probabilities(cfg, state.mode_means, PERFECT)
    for key in ("p1", "p2", "p3", "p13", "p23", "p123"):
        label = {"p1": "singles.d1", "p2": "singles.d2", "p3": "singles.d3", "p13": "coinc.d1d3",
                 "p23": "coinc.d2d3", "p123": "triples"}[key]
        assert p[label] == pytest.approx(case[key], rel=max(1e-3, 5 * case["mean"] ** 2))


def test_heralded_g2_zero_denominator():
    r = CountRecord("heralded_g2", {"d1": 0, "d2": 0, "d3": 10}, {"d1d2": 0, "d1d3": 0, "d2d3": 0}, 0, 100, 1.0, 1.0)
    with pytest.raises(EstimateError):
        ct.heralded_g2(r)


def test_heralded_g2_nondecreasing_in_mean():
    values = []
    for n in (0.001, 0.005, 0.02, 0.05):
        cfg = ExperimentConfig(topology="heralded_g2", pulses=4_000_000, seed=int(n * 1e4))
        r = ct.run_experiment(cfg, SourceState.equal_modes(2, n), PERFECT)
        values.append((ct.heralded_g2(r), ct.heralded_g2_sigma(r)))
    for (g0, s0), (g1, s1) in zip(values, values[1:]):
        assert g1 - g0 > -3 * np.hypot(s0, s1)
    assert values[-1][0] > values[0][0]


def test_brightness_synthetic_record():
    # S_s S_i / (C t P dl) = 4e4 * 3e4 / (1e3 * 10 * 8.633e-3 * 1.0) = 1.39e7
    r = CountRecord("direct", {"d1": 40_000, "d2": 30_000}, {"d1d2": 1000}, 0, 10**7, 10.0, 1.2e9 / (1.39e7 * 1e4))
    assert ct.brightness(r, 1.0) == pytest.approx(1.39e7, rel=1e-12)


def test_brightness_one_pair_per_pulse():
    N = 5000
    r = CountRecord("direct", {"d1": N, "d2": N}, {"d1d2": N}, 0, N, 2.0, 0.5)
    assert ct.brightness(r, 1.6) == pytest.approx(N / (2.0 * 0.5 * 1.6))


def test_brightness_needs_coincidences_and_positive_inputs():
    with pytest.raises(EstimateError):
        ct.brightness(record(coincidences={"d1d2": 0}), 1.0)
    with pytest.raises(ValueError):
        ct.brightness(record(), 0.0)


def test_brightness_loss_cancellation():
    state = SourceState.equal_modes(2, 0.01)
    estimates = []
    for scale, seed in ((1.0, 40), (0.5, 41)):
        cfg = ExperimentConfig(
            pulses=10_000_000, seed=seed, signal_chain=lossy_chain(0.58 * scale), idler_chain=lossy_chain(0.59 * scale)
        )
        r = ct.run_experiment(cfg, state, DetectorModel(0.85))
        estimates.append((ct.brightness(r, 1.0), ct.brightness_sigma(r, 1.0)))
    (b0, s0), (b1, s1) = estimates
    assert abs(b1 - b0) < 3 * np.hypot(s0, s1)


def test_merged_disjoint_runs_agree_with_single_run():
    state = SourceState.equal_modes(2, 0.02)
    base = ExperimentConfig(topology="direct", pulses=2_000_000, signal_chain=lossy_chain(0.6), idler_chain=lossy_chain(0.5))
    merged = ct.run_experiment(dataclasses.replace(base, seed=1), state, PERFECT) + ct.run_experiment(
        dataclasses.replace(base, seed=2), state, PERFECT
    )
    single = ct.run_experiment(dataclasses.replace(base, seed=3, pulses=4_000_000), state, PERFECT)
    assert merged.pulses == single.pulses
    diff = ct.heralding_efficiency(merged) - ct.heralding_efficiency(single)
    assert abs(diff) < 3 * np.hypot(ct.heralding_efficiency_sigma(merged), ct.heralding_efficiency_sigma(single))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 10**6), min_size=3, max_size=3))
def test_merge_associative(seeds):
    cfg = ExperimentConfig(topology="signal_splitter_g2", pulses=20_000)
    state = SourceState.equal_modes(1, 0.2)
    a, b, c = (ct.run_experiment(dataclasses.replace(cfg, seed=s), state, PERFECT) for s in seeds)
    assert (a + b) + c == a + (b + c)
