"""Temperature-dependent dispersion of uniaxial crystals.

Coefficient sets live in a TOML data file (see ``data/materials.toml`` for
the format) and are selected by name. The shipped default is congruent
lithium niobate after Edwards & Lawrence (1984).

Units inside this module: wavelength in micrometres, temperature in degrees
Celsius. All functions broadcast over numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

AXES = ("ordinary", "extraordinary")
DEFAULT_MATERIAL = "congruent_ln_edwards_lawrence"


class DomainError(ValueError):
    """Raised when a wavelength or temperature lies outside a model's validity range."""


@dataclass(frozen=True)
class AxisCoefficients:
    a: tuple[float, ...]
    b: tuple[float, ...] = ()
    t0: float = 0.0


@dataclass(frozen=True)
class MaterialModel:
    name: str
    form: str
    ordinary: AxisCoefficients
    extraordinary: AxisCoefficients
    wavelength_range: tuple[float, float]
    temperature_range: tuple[float, float]
    reference: str = ""

    def __post_init__(self):
        if self.form not in _FORMS:
            raise ValueError(f"unknown dispersion form {self.form!r}; known: {sorted(_FORMS)}")
        lo, hi = self.wavelength_range
        if not 0 < lo < hi:
            raise ValueError(f"bad wavelength range {self.wavelength_range}")
        if not self.temperature_range[0] <= self.temperature_range[1]:
            raise ValueError(f"bad temperature range {self.temperature_range}")

    def axis(self, polarization: str) -> AxisCoefficients:
        if polarization == "ordinary":
            return self.ordinary
        if polarization == "extraordinary":
            return self.extraordinary
        raise ValueError(f"polarization must be one of {AXES}, got {polarization!r}")


# --- dispersion forms: each returns (n^2, d(n^2)/d(lambda)) -----------------


def _edwards_lawrence(c: AxisCoefficients, lam, temp):
    a1, a2, a3, a4 = c.a
    b1, b2, b3 = c.b
    f = (temp - c.t0) * (temp + c.t0 + 546.0)
    num = a2 + b1 * f
    pole = (a3 + b2 * f) ** 2
    den = lam**2 - pole
    n2 = a1 + num / den + b3 * f - a4 * lam**2
    dn2 = -2.0 * lam * num / den**2 - 2.0 * a4 * lam
    return n2, dn2


def _sellmeier(c: AxisCoefficients, lam, temp):
    a = c.a
    lam2 = lam**2
    n2 = a[0] + 0.0 * lam
    dn2 = 0.0 * lam
    for b_j, c_j in zip(a[1::2], a[2::2]):
        n2 = n2 + b_j * lam2 / (lam2 - c_j)
        dn2 = dn2 - 2.0 * b_j * c_j * lam / (lam2 - c_j) ** 2
    return n2, dn2


_FORMS = {"edwards_lawrence": _edwards_lawrence, "sellmeier": _sellmeier}


def _check_range(model: MaterialModel, wavelength, temperature, strict=False):
    lam = np.asarray(wavelength, dtype=float)
    temp = np.asarray(temperature, dtype=float)
    lo, hi = model.wavelength_range
    if strict:
        bad_lo, bad_hi = np.any(lam <= lo), np.any(lam >= hi)
    else:
        bad_lo, bad_hi = np.any(lam < lo), np.any(lam > hi)
    if bad_lo:
        raise DomainError(
            f"wavelength {np.min(lam):g} um below lower bound {lo:g} um of {model.name}"
        )
    if bad_hi:
        raise DomainError(
            f"wavelength {np.max(lam):g} um above upper bound {hi:g} um of {model.name}"
        )
    tlo, thi = model.temperature_range
    if np.any(temp < tlo):
        raise DomainError(f"temperature {np.min(temp):g} C below lower bound {tlo:g} C of {model.name}")
    if np.any(temp > thi):
        raise DomainError(f"temperature {np.max(temp):g} C above upper bound {thi:g} C of {model.name}")
    return lam, temp


def refractive_index(model: MaterialModel, polarization: str, wavelength, temperature):
    """Phase index n(lambda [um], T [C]) along the given crystal axis."""
    lam, temp = _check_range(model, wavelength, temperature)
    n2, _ = _FORMS[model.form](model.axis(polarization), lam, temp)
    return np.sqrt(n2)


def group_index(model: MaterialModel, polarization: str, wavelength, temperature):
    """Group index n - lambda dn/dlambda from the analytic derivative of the dispersion form."""
    lam, temp = _check_range(model, wavelength, temperature, strict=True)
    n2, dn2 = _FORMS[model.form](model.axis(polarization), lam, temp)
    n = np.sqrt(n2)
    return n - lam * dn2 / (2.0 * n)


# --- loading -----------------------------------------------------------------


def _axis_from_table(table: dict) -> AxisCoefficients:
    return AxisCoefficients(
        a=tuple(float(x) for x in table["a"]),
        b=tuple(float(x) for x in table.get("b", ())),
        t0=float(table.get("t0", 0.0)),
    )


def material_from_table(name: str, table: dict) -> MaterialModel:
    return MaterialModel(
        name=name,
        form=table["form"],
        ordinary=_axis_from_table(table["ordinary"]),
        extraordinary=_axis_from_table(table["extraordinary"]),
        wavelength_range=tuple(float(x) for x in table["wavelength_range_um"]),
        temperature_range=tuple(float(x) for x in table["temperature_range_c"]),
        reference=table.get("reference", ""),
    )


def load_materials(path: str | Path | None = None) -> dict[str, MaterialModel]:
    """Read every coefficient set in a materials file (default: the shipped one)."""
    if path is None:
        text = resources.files("pdcsim").joinpath("data/materials.toml").read_text()
    else:
        text = Path(path).read_text()
    data = tomllib.loads(text)
    return {name: material_from_table(name, table) for name, table in data.items()}


@lru_cache(maxsize=None)
def _shipped() -> dict[str, MaterialModel]:
    return load_materials()


def get_material(name: str = DEFAULT_MATERIAL, path: str | Path | None = None) -> MaterialModel:
    materials = _shipped() if path is None else load_materials(path)
    try:
        return materials[name]
    except KeyError:
        raise KeyError(f"no material {name!r}; available: {sorted(materials)}") from None
