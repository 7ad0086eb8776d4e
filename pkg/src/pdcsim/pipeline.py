"""Pipeline stages behind the command line: each takes a RunConfig and
returns a flat dict of named figures of merit plus the artifacts to export.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import counting, jsa
from .components import chain_transmission, mode_overlap, predicted_raw_heralding
from .config import Check, ExperimentSettings, RunConfig
from .phasematch import find_degenerate_wavelength, find_poling_period, shg_tuning_curve

STAGES = ("shg", "design", "jsa", "budget", "simulate")


def shg_stage(cfg: RunConfig):
    s = cfg.shg
    curve = shg_tuning_curve(cfg.device, s.start_nm, s.stop_nm, s.points)
    out = {
        "peak_nm": curve.peak_nm,
        "fwhm_nm": curve.fwhm_nm,
        "step_nm": (s.stop_nm - s.start_nm) / (s.points - 1),
        "poled_length_mm": cfg.device.poled_length_mm,
    }
    if s.efficiency_pct_per_w_cm2 is not None:
        length_cm = cfg.device.poled_length_mm / 10.0
        out["peak_power_w_per_w2"] = float(curve.absolute_power(1.0, s.efficiency_pct_per_w_cm2, length_cm).max())
    return out, curve


def design_stage(cfg: RunConfig) -> dict:
    spec = cfg.device
    out = {
        "degenerate_nm": find_degenerate_wavelength(spec),
        "degenerate_uncalibrated_nm": find_degenerate_wavelength(cfg.uncalibrated_device),
        "index_offset_extraordinary": spec.offset("extraordinary"),
        "index_offset_ordinary": spec.offset("ordinary"),
    }
    d = cfg.design
    signal = d.signal_nm if d.signal_nm is not None else out["degenerate_nm"]
    idler = d.idler_nm if d.idler_nm is not None else signal
    pump = 1.0 / (1.0 / signal + 1.0 / idler)
    # the design period uses bulk indices, as a mask would be drawn before any measurement
    out["poling_period_um"] = find_poling_period(
        pump, signal, idler, cfg.uncalibrated_device.temperature_c,
        polarization=spec.polarization, material=spec.material,
    )
    out["design_pump_nm"] = pump
    for t in d.temperatures_c:
        out[f"degenerate_nm_at_{t:g}c"] = find_degenerate_wavelength(spec.replace(temperature_c=t))
    return out


@dataclass
class SpectralModel:
    """Unfiltered and filtered joint spectra for a config, built once."""

    cfg: RunConfig
    _cache: dict = field(default_factory=dict)

    @cached_property
    def axes(self) -> jsa.SpectralGridAxes:
        g = self.cfg.grid
        if g.half_span_nm is None:
            return jsa.auto_axes(self.cfg.device, self.cfg.pump, g.points, g.span_factor)
        degenerate = 2.0 * self.cfg.pump.center_nm
        return jsa.SpectralGridAxes.centered(
            g.signal_center_nm or degenerate, g.idler_center_nm or degenerate, g.half_span_nm, g.points
        )

    @cached_property
    def unfiltered(self) -> jsa.JointSpectralAmplitude:
        return jsa.build_jsa(self.cfg.device, self.cfg.pump, self.axes)

    def filtered(self, names=None) -> jsa.JointSpectralAmplitude:
        names = tuple(self.cfg.filters) if names is None else tuple(names)
        if names not in self._cache:
            out = self.unfiltered
            for name in names:
                f = self.cfg.filters[name]
                out = jsa.apply_filter(out, f.filter, f.arm)
            self._cache[names] = out
        return self._cache[names]

    def schmidt(self, names=()) -> jsa.SchmidtDecomposition:
        key = ("schmidt",) + tuple(names)
        if key not in self._cache:
            self._cache[key] = jsa.schmidt_decompose(self.filtered(names))
        return self._cache[key]


def jsa_stage(cfg: RunConfig, model: SpectralModel | None = None):
    model = model or SpectralModel(cfg)
    amp = model.unfiltered
    s, i = jsa.marginals(amp)
    schmidt = model.schmidt(())
    out = {
        "grid_points": amp.axes.shape[0],
        "grid_step_signal_nm": amp.axes.signal_step,
        "signal_fwhm_nm": s.fwhm_nm,
        "idler_fwhm_nm": i.fwhm_nm,
        "signal_peak_nm": s.peak_nm,
        "idler_peak_nm": i.peak_nm,
        "purity": schmidt.purity,
        "schmidt_number": schmidt.schmidt_number,
    }
    artifacts = {"jsi": amp, "marginal_signal": s, "marginal_idler": i, "schmidt": schmidt}
    if cfg.filters:
        filt = model.filtered()
        fs, fi = jsa.marginals(filt)
        fschmidt = model.schmidt(tuple(cfg.filters))
        out.update(
            filtered_signal_fwhm_nm=fs.fwhm_nm,
            filtered_idler_fwhm_nm=fi.fwhm_nm,
            filtered_purity=fschmidt.purity,
            filtered_schmidt_number=fschmidt.schmidt_number,
            filtered_jsi_purity=jsa.purity_from_intensity(filt.intensity),
            filter_pass_probability=filt.total_probability(),
        )
        artifacts.update(
            jsi_filtered=filt, marginal_signal_filtered=fs, marginal_idler_filtered=fi, schmidt_filtered=fschmidt
        )
    bandwidth = jsa.conditioned_bandwidth(amp, delta_herald=True)
    out.update(
        conditioned_bandwidth_nm=bandwidth,
        coherence_time_ps=jsa.coherence_time(amp, delta_herald=True),
        max_fiber_distance_km=jsa.max_fiber_distance(
            bandwidth, cfg.fiber.dispersion_ps_nm_km, cfg.fiber.repetition_rate_hz
        ),
    )
    return out, artifacts


def budget_stage(cfg: RunConfig) -> dict:
    pol = cfg.device.polarization
    out = {}
    for arm in ("signal", "idler"):
        if arm not in cfg.chains:
            continue
        chain = cfg.chains[arm]
        t = chain_transmission(chain, pol.mode(arm))
        out[f"{arm}_transmission"] = t
        out[f"{arm}_waveguide_transmission"] = chain.waveguide_transmission(pol.mode(arm))
        out[f"{arm}_detector_efficiency"] = chain.detector_efficiency
        out[f"{arm}_propagation_length_cm"] = chain.propagation_length_cm
    if "idler" in cfg.chains:
        det = cfg.chains["idler"].detector_efficiency
        out["predicted_raw_heralding"] = predicted_raw_heralding(out["idler_transmission"], det)
    if "signal" in cfg.chains:
        det = cfg.chains["signal"].detector_efficiency
        out["predicted_raw_signal_heralding"] = predicted_raw_heralding(out["signal_transmission"], det)
    fiber = cfg.modes.get("fiber")
    for name, mode in cfg.modes.items():
        if fiber is not None and mode is not fiber:
            out[f"overlap_{name}_fiber"] = mode_overlap(mode, fiber)
    return out


def source_state(cfg: RunConfig, exp: ExperimentSettings, model: SpectralModel) -> counting.SourceState:
    if exp.equal_modes is not None:
        return counting.SourceState.equal_modes(exp.equal_modes, exp.mean_pairs)
    return counting.SourceState.from_schmidt(model.schmidt(exp.filters), exp.mean_pairs)


def _estimates(exp: ExperimentSettings, record: counting.CountRecord) -> dict:
    """Figures of merit for one record.

    An estimator that is undefined for these counts (e.g. no coincidences)
    leaves its quantity out and records why under ``estimate_errors``.
    """
    top = exp.experiment.topology
    out, errors = {}, {}

    def put(name, fn, *args):
        try:
            out[name] = fn(*args)
        except counting.EstimateError as exc:
            errors[name] = str(exc)

    if top == "direct":
        put("heralding_efficiency", counting.heralding_efficiency, record)
        put("heralding_efficiency_sigma", counting.heralding_efficiency_sigma, record)
        if "heralding_efficiency" in out:
            det = exp.experiment.idler_chain.detector_efficiency
            out["corrected_heralding"] = counting.corrected_heralding(out["heralding_efficiency"], det)
        if exp.signal_bandwidth_nm is not None:
            put("brightness", counting.brightness, record, exp.signal_bandwidth_nm)
            put("brightness_sigma", counting.brightness_sigma, record, exp.signal_bandwidth_nm)
    elif top == "signal_splitter_g2":
        put("g2_raw", counting.unheralded_g2, record)
        put("g2_raw_sigma", counting.unheralded_g2_sigma, record)
        rho = 1.0 - exp.background_fraction
        if "g2_raw_sigma" in out:
            out["g2_corrected_sigma"] = out["g2_raw_sigma"] / rho**2
        g2 = out.get("g2_raw")
        if g2 is not None and g2 >= 1.0:
            out["g2_corrected"] = counting.background_corrected_g2(g2, exp.background_fraction)
        elif g2 is not None:
            errors["g2_corrected"] = f"raw g2 {g2:.4g} < 1; the background correction is undefined"
        else:
            errors["g2_corrected"] = errors["g2_raw"]
    else:
        put("heralded_g2", counting.heralded_g2, record)
        put("heralded_g2_sigma", counting.heralded_g2_sigma, record)
    if errors:
        out["estimate_errors"] = errors
    return out


def run_one(cfg: RunConfig, exp: ExperimentSettings, model: SpectralModel, workers: int = 1):
    state = source_state(cfg, exp, model)
    config = exp.experiment
    eff = {"signal": config.signal_chain.detector_efficiency, "idler": config.idler_chain.detector_efficiency}
    detectors = counting.calibrated_detectors(config, state.mode_means, eff, exp.background_fraction)
    record = counting.run_experiment(config, state, detectors, workers=workers)
    summary = {
        "topology": config.topology,
        "pulses": config.pulses,
        "seed": config.seed,
        "mean_pairs": exp.mean_pairs,
        "source_purity": state.purity,
        "background_fraction": exp.background_fraction,
        "signal_transmission": config.signal_transmission,
        "idler_transmission": config.idler_transmission,
    }
    for k, det in enumerate(detectors):
        summary[f"background_click_probability_d{k + 1}"] = det.background_click_probability
    summary.update(_estimates(exp, record))
    return summary, record


def simulate_stage(cfg: RunConfig, names=None, model: SpectralModel | None = None, workers: int = 1):
    model = model or SpectralModel(cfg)
    selected = cfg.experiments if not names else [cfg.experiment(n) for n in names]
    summaries, records = {}, {}
    for exp in selected:
        summaries[exp.name], records[exp.name] = run_one(cfg, exp, model, workers)
    return summaries, records


# --- checks --------------------------------------------------------------------


def flatten(stage_results: dict) -> dict:
    """``{"jsa": {"purity": ...}, "simulate": {"exp": {...}}}`` -> dotted keys."""
    flat = {}

    def walk(prefix, node):
        for key, value in node.items():
            name = f"{prefix}.{key}" if prefix else key
            if isinstance(value, dict):
                walk(name, value)
            else:
                flat[name] = value

    walk("", stage_results)
    return flat


def evaluate_check(check: Check, quantities: dict, stage_errors: dict) -> dict:
    result = {"quantity": check.quantity, "kind": check.kind}
    stage = check.quantity.split(".", 1)[0]
    reference = check.reference
    if check.reference_quantity is not None:
        reference = quantities.get(check.reference_quantity)
    result["reference"] = reference

    def skip(reason):
        result.update(status="skipped", reason=reason)
        return result

    if stage not in STAGES:
        return skip(f"unknown stage {stage!r}")
    if stage in stage_errors:
        return skip(f"{stage} stage failed: {stage_errors[stage]}")
    if check.quantity not in quantities:
        head, _, leaf = check.quantity.rpartition(".")
        why = quantities.get(f"{head}.estimate_errors.{leaf}")
        return skip(f"estimate undefined: {why}" if why else "quantity not produced by the configured stages")
    if reference is None and check.kind in ("tolerance", "rel_tolerance", "sigmas"):
        return skip(f"reference quantity {check.reference_quantity!r} not available")
    value = float(quantities[check.quantity])
    result["value"] = value
    if check.kind == "tolerance":
        ok = abs(value - reference) <= check.tolerance
        result["allowed"] = check.tolerance
    elif check.kind == "rel_tolerance":
        ok = abs(value - reference) <= check.tolerance * abs(reference)
        result["allowed"] = check.tolerance * abs(reference)
    elif check.kind == "range":
        lo, hi = check.range
        if check.range_sigmas:
            # value within k sigma of some point of the interval
            sigma = quantities.get(check.quantity + "_sigma")
            if sigma is None:
                return skip("no statistical uncertainty available for a widened range")
            lo, hi = lo - check.range_sigmas * sigma, hi + check.range_sigmas * sigma
        ok = lo <= value <= hi
        result["allowed"] = [lo, hi]
    elif check.kind == "minimum":
        ok = value >= check.tolerance
        result["allowed"] = check.tolerance
    else:
        sigma = quantities.get(check.quantity + "_sigma")
        if sigma is None:
            return skip("no statistical uncertainty available for a sigma comparison")
        ref_sigma = check.reference_sigma
        if check.reference_quantity is not None:
            ref_sigma = quantities.get(check.reference_quantity + "_sigma", ref_sigma)
        allowed = check.tolerance * math.hypot(sigma, ref_sigma)
        ok = abs(value - reference) <= allowed
        result["allowed"] = allowed
    result["status"] = "pass" if ok else "fail"
    return result


def report(cfg: RunConfig, workers: int = 1) -> dict:
    model = SpectralModel(cfg)
    results, errors = {}, {}
    runners = {
        "budget": lambda: budget_stage(cfg),
        "design": lambda: design_stage(cfg),
        "shg": lambda: shg_stage(cfg)[0],
        "jsa": lambda: jsa_stage(cfg, model)[0],
        "simulate": lambda: simulate_stage(cfg, model=model, workers=workers)[0],
    }
    for stage, run in runners.items():
        try:
            results[stage] = run()
        except Exception as exc:  # recorded; checks on this stage become skipped
            errors[stage] = f"{type(exc).__name__}: {exc}"
    quantities = flatten(results)
    checks = [evaluate_check(c, quantities, errors) for c in cfg.checks]
    counts = {s: sum(1 for c in checks if c["status"] == s) for s in ("pass", "fail", "skipped")}
    return {
        "quantities": {k: _plain(v) for k, v in quantities.items()},
        "checks": checks,
        "summary": counts,
        "stage_errors": errors,
    }


def _plain(value):
    if isinstance(value, np.generic):
        return value.item()
    return value
