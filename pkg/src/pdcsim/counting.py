"""Click-level Monte Carlo of pulsed pair-source experiments and the
count-based estimators applied to its output.

Each pulse draws a thermal (geometric) pair number per Schmidt mode. Loss
is binomial thinning per photon, a beam splitter routes each photon
independently, detectors are threshold (click / no click) with a per-pulse
background click probability. Coincidence windows are one pulse wide.

Pulses are processed in fixed-size blocks, each with its own generator
spawned from the experiment seed, so a record does not depend on how many
workers processed the blocks.
"""

from __future__ import annotations

import dataclasses
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .components import ComponentChain, chain_transmission

TOPOLOGIES = ("direct", "signal_splitter_g2", "heralded_g2")
BLOCK_SIZE = 1 << 20
# Modes carrying less than this fraction of the pairs are not sampled.
MODE_CUTOFF = 1e-14


class EstimateError(ValueError):
    """An estimator's denominator is zero."""


# --- source ------------------------------------------------------------------


@dataclass(frozen=True)
class SourceState:
    schmidt_amplitudes: np.ndarray
    mean_pairs: float

    def __post_init__(self):
        r = np.abs(np.asarray(self.schmidt_amplitudes, dtype=float)).ravel()
        total = np.sum(r**2)
        if not total > 0:
            raise ValueError("Schmidt amplitudes are all zero")
        if not self.mean_pairs > 0:
            raise ValueError("mean pair number must be positive")
        r = r / np.sqrt(total)
        r.flags.writeable = False
        object.__setattr__(self, "schmidt_amplitudes", r)

    @classmethod
    def equal_modes(cls, modes: int, mean_pairs: float) -> SourceState:
        return cls(np.ones(modes), mean_pairs)

    @classmethod
    def from_schmidt(cls, decomposition, mean_pairs: float) -> SourceState:
        return cls(decomposition.amplitudes, mean_pairs)

    @property
    def mode_means(self) -> np.ndarray:
        return self.mean_pairs * self.schmidt_amplitudes**2

    @property
    def purity(self) -> float:
        return float(np.sum(self.schmidt_amplitudes**4))

    def _active_means(self) -> np.ndarray:
        n = self.mode_means
        return n[n > MODE_CUTOFF * self.mean_pairs]

    def sample_pulse(self, rng: np.random.Generator) -> np.ndarray:
        """Pair number in each Schmidt mode for one pulse."""
        n = self.mode_means
        return rng.geometric(1.0 / (1.0 + n)) - 1

    def sample_total_pairs(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Total pair number per pulse for ``size`` pulses (exact, no truncation)."""
        n = self._active_means()
        p0 = 1.0 / (1.0 + n)
        p_any = -np.expm1(-np.sum(np.log1p(n)))
        out = np.zeros(size, dtype=np.int64)
        hit = np.nonzero(rng.random(size) < p_any)[0]
        if hit.size == 0:
            return out
        # Condition on at least one pair: pick the first occupied mode, give it
        # 1 + geometric pairs (memoryless), later modes are unconstrained.
        all_zero_before = np.concatenate(([1.0], np.cumprod(p0)[:-1]))
        first = all_zero_before * (n / (1.0 + n))
        cdf = np.cumsum(first)
        cdf /= cdf[-1]
        k_first = np.minimum(np.searchsorted(cdf, rng.random(hit.size), side="right"), n.size - 1)
        draws = rng.geometric(p0, size=(hit.size, n.size)) - 1
        draws[np.arange(n.size)[None, :] < k_first[:, None]] = 0
        draws[np.arange(hit.size), k_first] += 1
        out[hit] = draws.sum(axis=1)
        return out


def sample_pulse(state: SourceState, rng: np.random.Generator) -> np.ndarray:
    return state.sample_pulse(rng)


# --- detection -----------------------------------------------------------------


@dataclass(frozen=True)
class DetectorModel:
    efficiency: float = 1.0
    background_click_probability: float = 0.0
    number_resolving: bool = False

    def __post_init__(self):
        for name in ("efficiency", "background_click_probability"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} {v} outside [0, 1]")
        if self.number_resolving:
            raise ValueError("only threshold detectors are modelled")


def click_probability(mode_means, efficiency: float) -> float:
    """Photon-induced click probability of a threshold detector behind a lossy channel."""
    n = np.asarray(mode_means, dtype=float)
    return float(-np.expm1(-np.sum(np.log1p(efficiency * n))))


def joint_click_probability(mode_means, eta_a: float, eta_b: float) -> float:
    """Both arms click (photon-induced) for a multimode thermal pair source."""
    n = np.asarray(mode_means, dtype=float)

    def none(eta):
        return np.exp(-np.sum(np.log1p(eta * n)))

    return float(1.0 - none(eta_a) - none(eta_b) + none(eta_a + eta_b - eta_a * eta_b))


def background_probability_for_fraction(fraction: float, photon_click_probability: float) -> float:
    """Per-pulse background click probability making up ``fraction`` of all clicks."""
    if not 0.0 <= fraction < 1.0:
        raise ValueError("background fraction must lie in [0, 1)")
    p = photon_click_probability
    return fraction * p / (1.0 - fraction + fraction * p)


# --- experiment ----------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    topology: str = "direct"
    pulses: int = 1_000_000
    seed: int = 0
    signal_chain: ComponentChain = field(default_factory=ComponentChain)
    idler_chain: ComponentChain = field(default_factory=ComponentChain)
    signal_polarization: str = "TE"
    idler_polarization: str = "TM"
    splitter_ratio: float = 0.5
    repetition_rate_hz: float = 1e6
    pump_power_mw: float = 1.0
    name: str = ""

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"topology must be one of {TOPOLOGIES}, got {self.topology!r}")
        if self.pulses != int(self.pulses) or self.pulses <= 0:
            raise ValueError(f"pulses must be a positive integer, got {self.pulses!r}")
        # frozen: TOML writes 1e7 as a float
        object.__setattr__(self, "pulses", int(self.pulses))
        if not 0.0 < self.splitter_ratio < 1.0:
            raise ValueError("splitter ratio must lie in (0, 1)")
        if self.repetition_rate_hz <= 0 or self.pump_power_mw <= 0:
            raise ValueError("repetition rate and pump power must be positive")

    @property
    def signal_transmission(self) -> float:
        return chain_transmission(self.signal_chain, self.signal_polarization)

    @property
    def idler_transmission(self) -> float:
        return chain_transmission(self.idler_chain, self.idler_polarization)

    def detector_arms(self) -> tuple[str, ...]:
        """Arm feeding each detector d1, d2[, d3]."""
        return {
            "direct": ("signal", "idler"),
            "signal_splitter_g2": ("signal", "signal"),
            "heralded_g2": ("idler", "idler", "signal"),
        }[self.topology]


@dataclass(frozen=True)
class CountRecord:
    topology: str
    singles: dict
    coincidences: dict
    triples: int
    pulses: int
    integration_time_s: float
    pump_power_mw: float

    def __post_init__(self):
        singles = {k: int(v) for k, v in self.singles.items()}
        coinc = {k: int(v) for k, v in self.coincidences.items()}
        object.__setattr__(self, "singles", singles)
        object.__setattr__(self, "coincidences", coinc)
        object.__setattr__(self, "triples", int(self.triples))
        object.__setattr__(self, "pulses", int(self.pulses))
        for key, c in coinc.items():
            a, b = "d" + key[1], "d" + key[3]
            if c > min(singles[a], singles[b]):
                raise ValueError(f"coincidences {key}={c} exceed contributing singles")
        if coinc and self.triples > min(coinc.values()):
            raise ValueError("triples exceed a pairwise coincidence count")
        if any(v > self.pulses for v in singles.values()):
            raise ValueError("counts exceed the number of pulses")

    def __add__(self, other: CountRecord) -> CountRecord:
        if not isinstance(other, CountRecord):
            return NotImplemented
        if other.topology != self.topology or set(other.singles) != set(self.singles):
            raise ValueError("cannot merge records from different topologies")
        if other.pump_power_mw != self.pump_power_mw:
            raise ValueError("cannot merge records taken at different pump powers")
        return CountRecord(
            topology=self.topology,
            singles={k: v + other.singles[k] for k, v in self.singles.items()},
            coincidences={k: v + other.coincidences[k] for k, v in self.coincidences.items()},
            triples=self.triples + other.triples,
            pulses=self.pulses + other.pulses,
            integration_time_s=self.integration_time_s + other.integration_time_s,
            pump_power_mw=self.pump_power_mw,
        )

    def to_dict(self) -> dict:
        flat = {"topology": self.topology}
        flat.update({f"singles.{k}": v for k, v in self.singles.items()})
        flat.update({f"coinc.{k}": v for k, v in self.coincidences.items()})
        flat.update(
            triples=self.triples,
            pulses=self.pulses,
            integration_time_s=self.integration_time_s,
            pump_power_mw=self.pump_power_mw,
        )
        return flat

    @classmethod
    def from_dict(cls, flat: dict) -> CountRecord:
        singles = {k.split(".", 1)[1]: v for k, v in flat.items() if k.startswith("singles.")}
        coinc = {k.split(".", 1)[1]: v for k, v in flat.items() if k.startswith("coinc.")}
        return cls(
            topology=flat["topology"],
            singles=singles,
            coincidences=coinc,
            triples=flat["triples"],
            pulses=flat["pulses"],
            integration_time_s=float(flat["integration_time_s"]),
            pump_power_mw=float(flat["pump_power_mw"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> CountRecord:
        return cls.from_dict(json.loads(text))


def _resolve_detectors(config: ExperimentConfig, detectors) -> list[DetectorModel]:
    arms = config.detector_arms()
    if isinstance(detectors, DetectorModel):
        return [detectors for _ in arms]
    if isinstance(detectors, (list, tuple)):
        if len(detectors) != len(arms):
            raise ValueError(f"{config.topology} needs {len(arms)} detectors, got {len(detectors)}")
        return list(detectors)
    return [detectors[arm] for arm in arms]


def photon_click_probabilities(config: ExperimentConfig, mode_means, efficiencies: dict) -> list[float]:
    """Source-induced click probability of each detector (d1, d2[, d3])."""
    arm_eta = {"signal": config.signal_transmission, "idler": config.idler_transmission}
    arms = config.detector_arms()
    route = [1.0] * len(arms)
    if config.topology != "direct":
        route[0], route[1] = config.splitter_ratio, 1.0 - config.splitter_ratio
    return [
        click_probability(mode_means, arm_eta[arm] * frac * efficiencies[arm])
        for arm, frac in zip(arms, route)
    ]


def _photon_routes(config: ExperimentConfig, dets) -> dict:
    """Arm -> [(detector index, probability a photon of that arm clicks it)]."""
    eta = {"signal": config.signal_transmission, "idler": config.idler_transmission}
    arms = config.detector_arms()
    routes = {"signal": [], "idler": []}
    for d, arm in enumerate(arms):
        frac = 1.0
        if config.topology != "direct" and d < 2:
            frac = config.splitter_ratio if d == 0 else 1.0 - config.splitter_ratio
        routes[arm].append((d, eta[arm] * frac * dets[d].efficiency))
    return routes


def expected_click_probabilities(config: ExperimentConfig, mode_means, detectors) -> dict:
    """Exact per-pulse click probabilities for a multimode thermal pair source.

    A pair misses every detector in a set S with probability q_S (product
    over arms of 1 minus the summed click probabilities into S), so
    P(no click in S) = prod_d (1 - b_d) * prod_k 1 / (1 + n_k (1 - q_S)).
    Joint click probabilities follow by inclusion-exclusion. Keys mirror
    the CountRecord schema.
    """
    dets = _resolve_detectors(config, detectors)
    n = np.asarray(mode_means, dtype=float)
    routes = _photon_routes(config, dets)

    def none(subset):
        q = 1.0
        for arm_routes in routes.values():
            q *= 1.0 - sum(p for d, p in arm_routes if d in subset)
        bg = np.prod([1.0 - dets[d].background_click_probability for d in subset])
        return bg * np.exp(-np.sum(np.log1p(n * (1.0 - q))))

    def all_click(group):
        total = 0.0
        for size in range(len(group) + 1):
            for subset in combinations(group, size):
                total += (-1) ** size * none(set(subset))
        return float(total)

    labels = [f"d{k + 1}" for k in range(len(dets))]
    out = {f"singles.{labels[d]}": all_click((d,)) for d in range(len(dets))}
    for a, b in combinations(range(len(dets)), 2):
        out[f"coinc.{labels[a]}{labels[b]}"] = all_click((a, b))
    out["triples"] = all_click(tuple(range(len(dets)))) if len(dets) == 3 else 0.0
    return out


def calibrated_detectors(config: ExperimentConfig, mode_means, efficiencies: dict, background_fraction: float):
    """One DetectorModel per detector whose background makes up ``background_fraction`` of its singles."""
    probs = photon_click_probabilities(config, mode_means, efficiencies)
    return [
        DetectorModel(efficiencies[arm], background_probability_for_fraction(background_fraction, p))
        for arm, p in zip(config.detector_arms(), probs)
    ]


def _run_block(config, state, dets, size, seed_seq):
    rng = np.random.Generator(np.random.Philox(seed_seq))
    n_det = len(dets)
    clicks = np.empty((n_det, size), dtype=bool)
    for d, det in enumerate(dets):
        clicks[d] = rng.random(size) < det.background_click_probability

    pairs = state.sample_total_pairs(rng, size)
    idx = np.nonzero(pairs)[0]
    n = pairs[idx]
    eta_s, eta_i = config.signal_transmission, config.idler_transmission
    r = config.splitter_ratio

    def split(photons, first, second):
        to_first = rng.binomial(photons, r)
        hit_a = rng.binomial(to_first, first.efficiency) > 0
        hit_b = rng.binomial(photons - to_first, second.efficiency) > 0
        return hit_a, hit_b

    if config.topology == "direct":
        clicks[0, idx] |= rng.binomial(n, eta_s * dets[0].efficiency) > 0
        clicks[1, idx] |= rng.binomial(n, eta_i * dets[1].efficiency) > 0
    elif config.topology == "signal_splitter_g2":
        a, b = split(rng.binomial(n, eta_s), dets[0], dets[1])
        clicks[0, idx] |= a
        clicks[1, idx] |= b
    else:
        clicks[2, idx] |= rng.binomial(n, eta_s * dets[2].efficiency) > 0
        a, b = split(rng.binomial(n, eta_i), dets[0], dets[1])
        clicks[0, idx] |= a
        clicks[1, idx] |= b

    labels = [f"d{k + 1}" for k in range(n_det)]
    singles = {lab: int(np.count_nonzero(clicks[k])) for k, lab in enumerate(labels)}
    coinc = {
        f"{labels[a]}{labels[b]}": int(np.count_nonzero(clicks[a] & clicks[b]))
        for a, b in combinations(range(n_det), 2)
    }
    triples = int(np.count_nonzero(clicks.all(axis=0))) if n_det == 3 else 0
    return CountRecord(
        topology=config.topology,
        singles=singles,
        coincidences=coinc,
        triples=triples,
        pulses=size,
        integration_time_s=size / config.repetition_rate_hz,
        pump_power_mw=config.pump_power_mw,
    )


def run_experiment(config: ExperimentConfig, state, detectors, workers: int = 1) -> CountRecord:
    """Simulate ``config.pulses`` pulses and tally clicks.

    ``state`` needs a ``sample_total_pairs(rng, size)`` method; ``detectors``
    is one DetectorModel for every detector, a mapping arm -> model, or a
    sequence with one model per detector (d1, d2[, d3]).
    """
    dets = _resolve_detectors(config, detectors)
    n_blocks = -(-config.pulses // BLOCK_SIZE)
    sizes = [BLOCK_SIZE] * (n_blocks - 1) + [config.pulses - BLOCK_SIZE * (n_blocks - 1)]
    seeds = np.random.SeedSequence(config.seed).spawn(n_blocks)
    jobs = list(zip(sizes, seeds))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: _run_block(config, state, dets, *job), jobs))
    else:
        parts = [_run_block(config, state, dets, *job) for job in jobs]
    total = parts[0]
    for part in parts[1:]:
        total = total + part
    # block-summed float time can differ in the last ulp; recompute
    return dataclasses.replace(total, integration_time_s=config.pulses / config.repetition_rate_hz)


# --- estimators ----------------------------------------------------------------


def _require(topology: str, record: CountRecord):
    if record.topology != topology:
        raise ValueError(f"estimator needs a {topology!r} record, got {record.topology!r}")


def heralding_efficiency(record: CountRecord) -> float:
    """Raw idler heralding efficiency C / S_s (direct topology: d1 signal, d2 idler)."""
    _require("direct", record)
    heralds = record.singles["d1"]
    if heralds == 0:
        raise EstimateError("no herald (signal) counts")
    return record.coincidences["d1d2"] / heralds


def heralding_efficiency_sigma(record: CountRecord) -> float:
    eta = heralding_efficiency(record)
    return float(np.sqrt(eta * (1.0 - eta) / record.singles["d1"]))


def corrected_heralding(raw: float, detector_efficiency: float) -> float:
    if not 0.0 < detector_efficiency <= 1.0:
        raise ValueError("detector efficiency must lie in (0, 1]")
    return raw / detector_efficiency


def unheralded_g2(record: CountRecord) -> float:
    """C12 N / (S1 S2) across the two outputs of the signal splitter."""
    _require("signal_splitter_g2", record)
    s1, s2 = record.singles["d1"], record.singles["d2"]
    if s1 == 0 or s2 == 0:
        raise EstimateError("a splitter output recorded no counts")
    return record.coincidences["d1d2"] * record.pulses / (s1 * s2)


def unheralded_g2_sigma(record: CountRecord) -> float:
    g2 = unheralded_g2(record)
    c = record.coincidences["d1d2"]
    if c == 0:
        raise EstimateError("no coincidences; uncertainty undefined")
    rel = 1.0 / c + 1.0 / record.singles["d1"] + 1.0 / record.singles["d2"]
    return float(g2 * np.sqrt(rel))


def _poissonian_admixture(g2_raw: float, background_fraction: float) -> float:
    rho = 1.0 - background_fraction
    return 1.0 + (g2_raw - 1.0) / rho**2


G2_BACKGROUND_CONVENTIONS = {"poissonian_admixture": _poissonian_admixture}


def background_corrected_g2(g2_raw: float, background_fraction: float, convention: str = "poissonian_admixture") -> float:
    """Remove uncorrelated background clicks from an unheralded g2.

    ``poissonian_admixture``: the detected light is a fraction 1 - b of
    source light mixed with a fraction b of Poissonian background, so
    g2_raw - 1 = (1 - b)^2 (g2 - 1).
    """
    if not 0.0 <= background_fraction < 1.0:
        raise ValueError("background fraction must lie in [0, 1)")
    if g2_raw < 1.0:
        raise ValueError("raw g2 below 1; background correction assumes a classical mixture")
    try:
        rule = G2_BACKGROUND_CONVENTIONS[convention]
    except KeyError:
        raise ValueError(f"unknown convention {convention!r}; known: {sorted(G2_BACKGROUND_CONVENTIONS)}") from None
    return rule(g2_raw, background_fraction)


def heralded_g2(record: CountRecord) -> float:
    """C123 N3 / (C13 C23): detectors 1, 2 on the split idler, 3 the signal herald."""
    _require("heralded_g2", record)
    c13, c23 = record.coincidences["d1d3"], record.coincidences["d2d3"]
    if c13 == 0 or c23 == 0:
        raise EstimateError("no herald-idler coincidences")
    return record.triples * record.singles["d3"] / (c13 * c23)


def heralded_g2_sigma(record: CountRecord) -> float:
    """Poisson error; with zero triples, the value one triple would give."""
    c13, c23 = record.coincidences["d1d3"], record.coincidences["d2d3"]
    n3 = record.singles["d3"]
    g2 = heralded_g2(record)
    if record.triples == 0:
        return n3 / (c13 * c23)
    rel = 1.0 / record.triples + 1.0 / c13 + 1.0 / c23 + 1.0 / n3
    return float(g2 * np.sqrt(rel))


def brightness(record: CountRecord, signal_bandwidth_nm: float) -> float:
    """Generated pairs per (s mW nm): S_s S_i / (C t P dl_s)."""
    _require("direct", record)
    c = record.coincidences["d1d2"]
    if c == 0:
        raise EstimateError("no coincidences")
    if min(record.integration_time_s, record.pump_power_mw, signal_bandwidth_nm) <= 0:
        raise ValueError("integration time, pump power and bandwidth must be positive")
    pairs_per_s = record.singles["d1"] * record.singles["d2"] / (c * record.integration_time_s)
    return pairs_per_s / (record.pump_power_mw * signal_bandwidth_nm)


def brightness_sigma(record: CountRecord, signal_bandwidth_nm: float) -> float:
    """Delta-method error treating exclusive singles and coincidences as independent Poisson counts."""
    c = record.coincidences["d1d2"]
    a = record.singles["d1"] - c
    b = record.singles["d2"] - c
    s1, s2 = a + c, b + c
    d_c = 1.0 / s1 + 1.0 / s2 - 1.0 / c
    rel2 = d_c**2 * c + a / s1**2 + b / s2**2
    return float(brightness(record, signal_bandwidth_nm) * np.sqrt(rel2))
