"""TOML run configuration: parsing, validation and ``--set`` overrides."""

from __future__ import annotations

import copy
import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

import tomli_w

from .components import ComponentChain, GaussianMode, OpticalElement, propagation_length_cm
from .counting import TOPOLOGIES, ExperimentConfig
from .dispersion import load_materials
from .jsa import PumpEnvelope, SpectralFilter
from .phasematch import WaveguideSpec, calibrate_offset

REFERENCE_CONFIG = "reference_device.toml"
CHECK_KINDS = ("tolerance", "rel_tolerance", "range", "minimum", "sigmas")


class ConfigError(ValueError):
    """Malformed config or a reference that does not resolve."""


@dataclass(frozen=True)
class GridSettings:
    points: int = 512
    half_span_nm: float | None = None
    span_factor: float = 3.0
    signal_center_nm: float | None = None
    idler_center_nm: float | None = None


@dataclass(frozen=True)
class ShgSettings:
    start_nm: float = 1550.0
    stop_nm: float = 1565.0
    points: int = 2001
    efficiency_pct_per_w_cm2: float | None = None


@dataclass(frozen=True)
class DesignSettings:
    signal_nm: float | None = None
    idler_nm: float | None = None
    temperatures_c: tuple = ()


@dataclass(frozen=True)
class FiberSettings:
    dispersion_ps_nm_km: float = 17.0
    repetition_rate_hz: float = 1e9


@dataclass(frozen=True)
class NamedFilter:
    filter: SpectralFilter
    arm: str


@dataclass(frozen=True)
class ExperimentSettings:
    experiment: ExperimentConfig
    mean_pairs: float
    filters: tuple = ()
    equal_modes: int | None = None
    background_fraction: float = 0.0
    signal_bandwidth_nm: float | None = None
    signal_chain_name: str = "signal"
    idler_chain_name: str = "idler"

    @property
    def name(self) -> str:
        return self.experiment.name


@dataclass(frozen=True)
class Check:
    quantity: str
    kind: str
    reference: float | None = None
    reference_quantity: str | None = None
    tolerance: float | None = None
    range: tuple | None = None
    reference_sigma: float = 0.0
    range_sigmas: float = 0.0


@dataclass(frozen=True)
class RunConfig:
    device: WaveguideSpec
    uncalibrated_device: WaveguideSpec
    calibrate_to_nm: float | None
    pump: PumpEnvelope
    pump_coupling: float | None
    grid: GridSettings
    shg: ShgSettings
    design: DesignSettings
    fiber: FiberSettings
    filters: dict
    modes: dict
    chains: dict
    experiments: tuple
    checks: tuple
    output_directory: Path
    raw: dict = field(repr=False, default_factory=dict)

    def experiment(self, name: str) -> ExperimentSettings:
        for exp in self.experiments:
            if exp.name == name:
                return exp
        raise ConfigError(f"no experiment named {name!r}; have {[e.name for e in self.experiments]}")


# --- loading -------------------------------------------------------------------


def reference_config_text() -> str:
    return resources.files("pdcsim.data").joinpath(REFERENCE_CONFIG).read_text()


def load_raw(path: str | Path | None = None) -> dict:
    """Parsed TOML document; ``None`` selects the shipped reference config."""
    if path is None:
        return tomllib.loads(reference_config_text())
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def dump_raw(raw: dict) -> str:
    return tomli_w.dumps(raw)


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_override(raw: dict, assignment: str) -> dict:
    """Apply ``block.key=value`` to a raw config (returns a modified copy).

    The value is parsed as a TOML value when possible, else kept as a
    string. ``experiments.<name>.<key>`` addresses an experiment by name.
    """
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    path, text = assignment.split("=", 1)
    keys = [k for k in path.strip().split(".") if k]
    if len(keys) < 1:
        raise ConfigError(f"override {assignment!r} has an empty key")
    raw = copy.deepcopy(raw)
    node = raw
    for i, key in enumerate(keys[:-1]):
        if isinstance(node, list):
            matches = [item for item in node if isinstance(item, dict) and item.get("name") == key]
            if not matches:
                raise ConfigError(f"override {assignment!r}: no entry named {key!r} in {'.'.join(keys[:i])}")
            node = matches[0]
        else:
            node = node.setdefault(key, {})
        if not isinstance(node, (dict, list)):
            raise ConfigError(f"override {assignment!r}: {'.'.join(keys[: i + 1])} is not a table")
    if isinstance(node, list):
        raise ConfigError(f"override {assignment!r}: select a list entry by name")
    node[keys[-1]] = _parse_value(text.strip())
    return raw


def _take(block: dict, cls, where: str, **extra):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(block) - names
    if unknown:
        raise ConfigError(f"[{where}] unknown keys: {sorted(unknown)}")
    try:
        return cls(**block, **extra)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}] {exc}") from exc


def _device(raw: dict, materials) -> tuple[WaveguideSpec, WaveguideSpec, float | None]:
    block = dict(raw.get("device", {}))
    target = block.get("calibrate_to_nm")
    try:
        spec = WaveguideSpec.from_dict(block, materials)
    except KeyError as exc:
        raise ConfigError(f"[device] unknown material {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[device] {exc}") from exc
    calibrated = spec if target is None else calibrate_offset(spec, float(target))
    return calibrated, spec, None if target is None else float(target)


def _chain(name: str, block: dict, spec: WaveguideSpec) -> ComponentChain:
    block = dict(block)
    elements = tuple(_take(e, OpticalElement, f"chains.{name}.elements") for e in block.pop("elements", []))
    loss = {"TE": 0.0, "TM": 0.0}
    loss.update(block.pop("loss_db_per_cm", {}))
    propagation = block.pop("propagation", "mean")
    if isinstance(propagation, str):
        length = propagation_length_cm(spec, propagation)
    else:
        length = float(propagation)
    detector = block.pop("detector_efficiency", 1.0)
    if block:
        raise ConfigError(f"[chains.{name}] unknown keys: {sorted(block)}")
    try:
        return ComponentChain(elements, loss, length, detector)
    except ValueError as exc:
        raise ConfigError(f"[chains.{name}] {exc}") from exc


def _mode(name: str, block: dict) -> GaussianMode:
    if "mode_field_diameter_um" in block:
        return GaussianMode.circular(block["mode_field_diameter_um"])
    if {"full_width_um", "full_height_um"} <= set(block):
        return GaussianMode.from_full_widths(block["full_width_um"], block["full_height_um"])
    if {"semi_axis_x", "semi_axis_y"} <= set(block):
        return GaussianMode(block["semi_axis_x"], block["semi_axis_y"])
    raise ConfigError(f"[modes.{name}] needs mode_field_diameter_um, full widths or semi-axes")


def _experiment(i: int, block: dict, chains: dict, filters: dict, pump: PumpEnvelope, spec: WaveguideSpec) -> ExperimentSettings:
    block = dict(block)
    name = block.get("name", f"experiment{i}")
    where = f"experiments.{name}"
    if "seed" not in block:
        raise ConfigError(f"[{where}] every Monte Carlo experiment needs a seed")
    if "mean_pairs" not in block:
        raise ConfigError(f"[{where}] mean_pairs is required")
    if block.get("topology", "direct") not in TOPOLOGIES:
        raise ConfigError(f"[{where}] topology must be one of {TOPOLOGIES}")
    sig_name = block.pop("signal_chain", "signal")
    idl_name = block.pop("idler_chain", "idler")
    for chain_name in (sig_name, idl_name):
        if chain_name not in chains:
            raise ConfigError(f"[{where}] unresolved chain reference {chain_name!r}")
    filter_names = tuple(block.pop("filters", ()))
    for f in filter_names:
        if f not in filters:
            raise ConfigError(f"[{where}] unresolved filter reference {f!r}")
    settings = {
        key: block.pop(key)
        for key in ("mean_pairs", "equal_modes", "background_fraction", "signal_bandwidth_nm")
        if key in block
    }
    block["name"] = name
    block.setdefault("repetition_rate_hz", pump.repetition_rate_hz)
    sig = chains[sig_name]
    idl = chains[idl_name]
    exp = _take(
        block,
        ExperimentConfig,
        where,
        signal_chain=sig,
        idler_chain=idl,
        signal_polarization=spec.polarization.signal,
        idler_polarization=spec.polarization.idler,
    )
    try:
        return ExperimentSettings(
            experiment=exp,
            filters=filter_names,
            signal_chain_name=sig_name,
            idler_chain_name=idl_name,
            **settings,
        )
    except TypeError as exc:
        raise ConfigError(f"[{where}] {exc}") from exc


def _check(i: int, block: dict) -> Check:
    where = f"checks[{i}]"
    if "quantity" not in block:
        raise ConfigError(f"[{where}] missing quantity")
    kinds = [k for k in CHECK_KINDS if k in block]
    if len(kinds) != 1:
        raise ConfigError(f"[{where}] needs exactly one of {CHECK_KINDS}, got {kinds}")
    kind = kinds[0]
    if "reference" not in block and "reference_quantity" not in block and kind in ("tolerance", "rel_tolerance", "sigmas"):
        raise ConfigError(f"[{where}] needs a reference or reference_quantity")
    known = {"quantity", "reference", "reference_quantity", "reference_sigma", "range_sigmas", *CHECK_KINDS}
    unknown = set(block) - known
    if unknown:
        raise ConfigError(f"[{where}] unknown keys: {sorted(unknown)}")
    value = block[kind]
    return Check(
        quantity=block["quantity"],
        kind=kind,
        reference=block.get("reference"),
        reference_quantity=block.get("reference_quantity"),
        tolerance=None if kind == "range" else float(value),
        range=tuple(value) if kind == "range" else None,
        reference_sigma=float(block.get("reference_sigma", 0.0)),
        range_sigmas=float(block.get("range_sigmas", 0.0)),
    )


def build_config(raw: dict, base_dir: Path | None = None) -> RunConfig:
    """Validate a raw TOML document and resolve every named reference."""
    known = {"output_directory", "materials_file", "device", "pump", "grid", "shg", "design", "fiber",
             "filters", "modes", "chains", "experiments", "checks"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown top-level blocks: {sorted(unknown)}")
    materials = None
    if "materials_file" in raw:
        mpath = Path(raw["materials_file"])
        if base_dir is not None and not mpath.is_absolute():
            mpath = base_dir / mpath
        materials = load_materials(mpath)
    device, uncalibrated, target = _device(raw, materials)
    pump_block = dict(raw.get("pump", {}))
    coupling = pump_block.pop("coupling_efficiency", None)
    pump = _take(pump_block, PumpEnvelope, "pump")

    filters = {}
    for name, block in raw.get("filters", {}).items():
        block = dict(block)
        arm = block.pop("arm", "signal")
        if arm not in ("signal", "idler"):
            raise ConfigError(f"[filters.{name}] arm must be signal or idler")
        filters[name] = NamedFilter(_take(block, SpectralFilter, f"filters.{name}"), arm)

    chains = {name: _chain(name, block, device) for name, block in raw.get("chains", {}).items()}
    modes = {name: _mode(name, block) for name, block in raw.get("modes", {}).items()}
    experiments = tuple(
        _experiment(i, block, chains, filters, pump, device) for i, block in enumerate(raw.get("experiments", []))
    )
    names = [e.name for e in experiments]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate experiment names in {names}")
    checks = tuple(_check(i, block) for i, block in enumerate(raw.get("checks", [])))
    design = dict(raw.get("design", {}))
    design["temperatures_c"] = tuple(design.get("temperatures_c", ()))
    out = Path(raw.get("output_directory", "pdcsim_out"))
    return RunConfig(
        device=device,
        uncalibrated_device=uncalibrated,
        calibrate_to_nm=target,
        pump=pump,
        pump_coupling=coupling,
        grid=_take(raw.get("grid", {}), GridSettings, "grid"),
        shg=_take(raw.get("shg", {}), ShgSettings, "shg"),
        design=_take(design, DesignSettings, "design"),
        fiber=_take(raw.get("fiber", {}), FiberSettings, "fiber"),
        filters=filters,
        modes=modes,
        chains=chains,
        experiments=experiments,
        checks=checks,
        output_directory=out,
        raw=raw,
    )


def load_config(path: str | Path | None = None, overrides=(), seed: int | None = None) -> RunConfig:
    """Load, override and validate. ``seed`` reseeds experiment i with ``seed + i``."""
    raw = load_raw(path)
    for assignment in overrides:
        raw = apply_override(raw, assignment)
    if seed is not None:
        for i, block in enumerate(raw.get("experiments", [])):
            block["seed"] = seed + i
    base = None if path is None else Path(path).resolve().parent
    return build_config(raw, base)


__all__ = [
    "Check",
    "ConfigError",
    "ExperimentSettings",
    "RunConfig",
    "apply_override",
    "build_config",
    "dump_raw",
    "load_config",
    "load_raw",
    "reference_config_text",
]
