"""First-order quasi-phasematching in a periodically poled waveguide.

Wavelengths are in nm at this module's boundary and converted to um before
calling into :mod:`pdcsim.dispersion`. Wave-vector mismatch is in rad/um.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import dispersion
from ._numeric import fwhm
from .dispersion import MaterialModel, get_material

ROLES = ("pump", "signal", "idler")
MODES = ("TE", "TM")

ENERGY_RTOL = 1e-9
SOLVER_TOL = 1e-9  # rad/um
MAX_OFFSET = 0.05


class PhasematchError(ValueError):
    pass


class CalibrationError(PhasematchError):
    pass


@dataclass(frozen=True)
class PolarizationMap:
    """Waveguide mode of each field, plus which crystal axis the TE mode samples.

    The default is a z-cut chip: TE sees the ordinary index, TM the
    extraordinary one.
    """

    pump: str = "TE"
    signal: str = "TE"
    idler: str = "TM"
    te_axis: str = "ordinary"

    def __post_init__(self):
        for role in ROLES:
            if getattr(self, role) not in MODES:
                raise ValueError(f"{role} mode must be TE or TM, got {getattr(self, role)!r}")
        if self.te_axis not in dispersion.AXES:
            raise ValueError(f"te_axis must be one of {dispersion.AXES}")
        if self.signal == self.idler:
            raise ValueError("type-II conversion needs orthogonally polarized signal and idler")

    def mode(self, role: str) -> str:
        return getattr(self, role)

    def axis(self, role: str) -> str:
        if self.mode(role) == "TE":
            return self.te_axis
        return "extraordinary" if self.te_axis == "ordinary" else "ordinary"

    def swapped(self) -> PolarizationMap:
        """Exchange the signal and idler assignments."""
        return dataclasses.replace(self, signal=self.idler, idler=self.signal)


@dataclass(frozen=True)
class WaveguideSpec:
    chip_length_mm: float = 25.0
    poled_length_mm: float = 21.0
    poling_period_um: float = 9.08
    temperature_c: float = 25.0
    polarization: PolarizationMap = field(default_factory=PolarizationMap)
    index_offset: dict = field(default_factory=lambda: {"ordinary": 0.0, "extraordinary": 0.0})
    material: MaterialModel = field(default_factory=get_material)

    def __post_init__(self):
        if min(self.chip_length_mm, self.poled_length_mm, self.poling_period_um) <= 0:
            raise ValueError("lengths and poling period must be positive")
        if self.poled_length_mm > self.chip_length_mm:
            raise ValueError("poled length exceeds chip length")
        unknown = set(self.index_offset) - set(dispersion.AXES)
        if unknown:
            raise ValueError(f"unknown axes in index_offset: {sorted(unknown)}")

    def offset(self, axis: str) -> float:
        return float(self.index_offset.get(axis, 0.0))

    def index(self, role: str, wavelength_nm, temperature_c=None):
        """Effective index seen by ``role`` (bulk index plus the axis offset)."""
        axis = self.polarization.axis(role)
        temp = self.temperature_c if temperature_c is None else temperature_c
        n = dispersion.refractive_index(self.material, axis, np.asarray(wavelength_nm) / 1000.0, temp)
        return n + self.offset(axis)

    def group_index(self, role: str, wavelength_nm):
        axis = self.polarization.axis(role)
        return dispersion.group_index(
            self.material, axis, np.asarray(wavelength_nm) / 1000.0, self.temperature_c
        )

    def replace(self, **changes) -> WaveguideSpec:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "chip_length_mm": self.chip_length_mm,
            "poled_length_mm": self.poled_length_mm,
            "poling_period_um": self.poling_period_um,
            "temperature_c": self.temperature_c,
            "material": self.material.name,
            "polarization": dataclasses.asdict(self.polarization),
            "index_offset": {axis: self.offset(axis) for axis in dispersion.AXES},
        }

    @classmethod
    def from_dict(cls, data: dict, materials: dict | None = None) -> WaveguideSpec:
        data = dict(data)
        name = data.pop("material", dispersion.DEFAULT_MATERIAL)
        material = materials[name] if materials and name in materials else get_material(name)
        pol = PolarizationMap(**data.pop("polarization", {}))
        offsets = {"ordinary": 0.0, "extraordinary": 0.0}
        offsets.update({k: float(v) for k, v in data.pop("index_offset", {}).items()})
        data.pop("calibrate_to_nm", None)
        return cls(polarization=pol, index_offset=offsets, material=material, **data)


@dataclass(frozen=True)
class PhasematchPoint:
    pump_nm: float
    signal_nm: float
    idler_nm: float
    mismatch: float = float("nan")

    def __post_init__(self):
        _check_energy(self.pump_nm, self.signal_nm, self.idler_nm, rtol=1e-12)

    @classmethod
    def from_pump_and_signal(cls, spec: WaveguideSpec | None, pump_nm: float, signal_nm: float):
        idler_nm = 1.0 / (1.0 / pump_nm - 1.0 / signal_nm)
        mismatch = float("nan") if spec is None else float(qpm_mismatch(spec, pump_nm, signal_nm, idler_nm))
        return cls(pump_nm, signal_nm, idler_nm, mismatch)


def _check_energy(lp, ls, li, rtol=ENERGY_RTOL):
    lp, ls, li = (np.asarray(v, dtype=float) for v in (lp, ls, li))
    inv_p = 1.0 / lp
    err = np.abs(inv_p - 1.0 / ls - 1.0 / li) / inv_p
    if np.any(err > rtol):
        raise ValueError(
            f"energy conservation violated (1/lp = 1/ls + 1/li off by {np.max(err):.3g} relative)"
        )


def material_mismatch(spec: WaveguideSpec, lp, ls, li):
    """k_p - k_s - k_i in rad/um, without the grating vector and without checks."""
    lp, ls, li = (np.asarray(v, dtype=float) for v in (lp, ls, li))
    return (2000.0 * np.pi) * (
        spec.index("pump", lp) / lp - spec.index("signal", ls) / ls - spec.index("idler", li) / li
    )


def qpm_mismatch(spec: WaveguideSpec, pump_nm, signal_nm, idler_nm):
    """Delta k = k_p - k_s - k_i - 2 pi / Lambda in rad/um (vectorized)."""
    _check_energy(pump_nm, signal_nm, idler_nm)
    return material_mismatch(spec, pump_nm, signal_nm, idler_nm) - 2.0 * np.pi / spec.poling_period_um


def pm_amplitude(mismatch, poled_length_mm: float):
    """Uniform-grating response sinc(dk L/2) exp(i dk L/2)."""
    x = np.asarray(mismatch, dtype=float) * poled_length_mm * 1000.0 / 2.0
    return np.sinc(x / np.pi) * np.exp(1j * x)


def _degenerate_mismatch(spec: WaveguideSpec, fundamental_nm):
    lam = np.asarray(fundamental_nm, dtype=float)
    return material_mismatch(spec, lam / 2.0, lam, lam) - 2.0 * np.pi / spec.poling_period_um


@dataclass(frozen=True)
class TuningCurve:
    wavelength_nm: np.ndarray
    intensity: np.ndarray

    @property
    def peak_nm(self) -> float:
        return float(self.wavelength_nm[np.argmax(self.intensity)])

    @property
    def fwhm_nm(self) -> float:
        return fwhm(self.wavelength_nm, self.intensity)

    def absolute_power(self, fundamental_power_w: float, efficiency_pct_per_w_cm2: float, length_cm: float):
        """Second-harmonic power in W from a user-supplied normalized conversion efficiency."""
        peak = efficiency_pct_per_w_cm2 / 100.0 * fundamental_power_w**2 * length_cm**2
        return peak * self.intensity


def shg_tuning_curve(spec: WaveguideSpec, start_nm: float, stop_nm: float, points: int = 2001) -> TuningCurve:
    """Normalized type-II SHG response versus fundamental wavelength.

    SHG is the degenerate reverse of the PDC process: both fundamental
    photons at ``lambda``, the second harmonic at ``lambda / 2``.
    """
    if not stop_nm > start_nm:
        raise ValueError(f"empty wavelength range [{start_nm}, {stop_nm}]")
    if points < 3:
        raise ValueError("need at least 3 points")
    lam = np.linspace(start_nm, stop_nm, int(points))
    dk = _degenerate_mismatch(spec, lam)
    intensity = np.abs(pm_amplitude(dk, spec.poled_length_mm)) ** 2
    intensity = intensity / intensity.max()
    return TuningCurve(lam, intensity)


def find_degenerate_wavelength(spec: WaveguideSpec, bracket=(1400.0, 1700.0), samples: int = 301) -> float:
    """Fundamental wavelength (nm) at which degenerate type-II conversion is phasematched."""
    lam = np.linspace(bracket[0], bracket[1], samples)
    dk = _degenerate_mismatch(spec, lam)
    crossings = np.nonzero(np.sign(dk[:-1]) * np.sign(dk[1:]) <= 0)[0]
    if crossings.size == 0:
        raise PhasematchError(f"no phasematching in range {bracket[0]:g}-{bracket[1]:g} nm")
    i = crossings[0]

    def f(x):
        return float(_degenerate_mismatch(spec, x))

    root = brentq(f, lam[i], lam[i + 1], xtol=1e-12, rtol=4 * np.finfo(float).eps, maxiter=200)
    # secant polish; brentq's xtol already puts |dk| well below SOLVER_TOL
    for _ in range(3):
        f0 = f(root)
        if abs(f0) < SOLVER_TOL * 1e-3:
            break
        h = 1e-6
        slope = (f(root + h) - f(root - h)) / (2 * h)
        root -= f0 / slope
    if abs(f(root)) >= SOLVER_TOL:
        raise PhasematchError(f"root refinement did not converge (|dk| = {abs(f(root)):.3g} rad/um)")
    return float(root)


def find_poling_period(
    pump_nm: float,
    signal_nm: float,
    idler_nm: float,
    temperature_c: float,
    polarization: PolarizationMap | None = None,
    material: MaterialModel | None = None,
    index_offset: dict | None = None,
) -> float:
    """Grating period (um) that closes k_p - k_s - k_i."""
    _check_energy(pump_nm, signal_nm, idler_nm)
    spec = WaveguideSpec(
        temperature_c=temperature_c,
        polarization=polarization or PolarizationMap(),
        material=material or get_material(),
        index_offset=dict(index_offset or {}),
    )
    dk = float(material_mismatch(spec, pump_nm, signal_nm, idler_nm))
    if dk <= 0:
        raise PhasematchError("co-propagating QPM impossible: k_p - k_s - k_i <= 0")
    return 2.0 * np.pi / dk


def calibrate_offset(spec: WaveguideSpec, observed_degeneracy_nm: float, bracket=(1400.0, 1700.0)) -> WaveguideSpec:
    """Fit the extraordinary-axis effective-index offset to an observed degeneracy point.

    The mismatch is affine in the offset, so two evaluations give the exact
    solution.
    """
    lam = float(observed_degeneracy_nm)
    if not bracket[0] < lam < bracket[1]:
        raise CalibrationError(f"observed wavelength {lam} nm outside search range {bracket}")

    def dk(delta):
        offsets = dict(spec.index_offset)
        offsets["extraordinary"] = delta
        return float(_degenerate_mismatch(spec.replace(index_offset=offsets), lam))

    d0, d1 = 0.0, 1e-3
    f0, f1 = dk(d0), dk(d1)
    if f1 == f0:
        raise CalibrationError("no field samples the extraordinary axis; offset has no effect")
    delta = d0 - f0 * (d1 - d0) / (f1 - f0)
    if abs(delta) >= MAX_OFFSET:
        raise CalibrationError(f"calibration needs |offset| = {abs(delta):.4f} >= {MAX_OFFSET}")
    offsets = dict(spec.index_offset)
    offsets["extraordinary"] = delta
    return spec.replace(index_offset=offsets)
