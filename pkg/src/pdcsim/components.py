"""Passive optical chain between the generation point and the detectors."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .phasematch import WaveguideSpec

POLARIZATIONS = ("TE", "TM")


@dataclass(frozen=True)
class GaussianMode:
    """Aligned elliptical Gaussian; semi-axes are 1/e^2 intensity radii in um."""

    semi_axis_x: float
    semi_axis_y: float

    def __post_init__(self):
        if self.semi_axis_x <= 0 or self.semi_axis_y <= 0:
            raise ValueError("mode semi-axes must be positive")

    @classmethod
    def from_full_widths(cls, width_um: float, height_um: float) -> GaussianMode:
        return cls(width_um / 2.0, height_um / 2.0)

    @classmethod
    def circular(cls, mode_field_diameter_um: float) -> GaussianMode:
        return cls(mode_field_diameter_um / 2.0, mode_field_diameter_um / 2.0)


def mode_overlap(a: GaussianMode, b: GaussianMode) -> float:
    """Power coupling between two centred, aligned elliptical Gaussian modes."""

    def one_axis(wa, wb):
        return 2.0 * wa * wb / (wa**2 + wb**2)

    return one_axis(a.semi_axis_x, b.semi_axis_x) * one_axis(a.semi_axis_y, b.semi_axis_y)


@dataclass(frozen=True)
class OpticalElement:
    name: str
    te: float = 1.0
    tm: float = 1.0

    def __post_init__(self):
        for t in (self.te, self.tm):
            if not 0.0 <= t <= 1.0:
                raise ValueError(f"{self.name}: transmission {t} outside [0, 1]")

    def transmission(self, polarization: str) -> float:
        if polarization == "TE":
            return self.te
        if polarization == "TM":
            return self.tm
        raise ValueError(f"polarization must be TE or TM, got {polarization!r}")

    def swapped(self) -> OpticalElement:
        return OpticalElement(self.name, te=self.tm, tm=self.te)


@dataclass(frozen=True)
class ComponentChain:
    elements: tuple[OpticalElement, ...] = ()
    loss_db_per_cm: dict = field(default_factory=lambda: {"TE": 0.0, "TM": 0.0})
    propagation_length_cm: float = 0.0
    detector_efficiency: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        if self.propagation_length_cm < 0:
            raise ValueError("propagation length must be non-negative")
        if not 0.0 <= self.detector_efficiency <= 1.0:
            raise ValueError("detector efficiency must lie in [0, 1]")

    def waveguide_transmission(self, polarization: str) -> float:
        loss = self.loss_db_per_cm.get(polarization, 0.0) * self.propagation_length_cm
        return 10.0 ** (-loss / 10.0)

    def appended(self, element: OpticalElement) -> ComponentChain:
        return dataclasses.replace(self, elements=self.elements + (element,))

    def swapped(self) -> ComponentChain:
        """TE and TM exchanged everywhere."""
        loss = {"TE": self.loss_db_per_cm.get("TM", 0.0), "TM": self.loss_db_per_cm.get("TE", 0.0)}
        return dataclasses.replace(self, elements=tuple(e.swapped() for e in self.elements), loss_db_per_cm=loss)


def propagation_length_cm(spec: WaveguideSpec, mode: str = "mean") -> float:
    """Waveguide path length travelled by a generated photon.

    ``mean``: pairs are born uniformly along a poled section centred on
    the chip, so the mean path is half the poled length plus the unpoled
    remainder on the output side. ``full``: the whole chip length.
    """
    if mode == "full":
        return spec.chip_length_mm / 10.0
    if mode == "mean":
        tail = (spec.chip_length_mm - spec.poled_length_mm) / 2.0
        return (spec.poled_length_mm / 2.0 + tail) / 10.0
    raise ValueError(f"propagation mode must be 'mean' or 'full', got {mode!r}")


def chain_transmission(chain: ComponentChain, polarization: str, include_detector: bool = False) -> float:
    t = chain.waveguide_transmission(polarization)
    for element in chain.elements:
        t *= element.transmission(polarization)
    if include_detector:
        t *= chain.detector_efficiency
    return t


def predicted_raw_heralding(chain, detector_efficiency: float, polarization: str = "TM") -> float:
    """Raw heralding efficiency expected from a loss budget.

    ``chain`` is either a ComponentChain (evaluated for the heralded
    photon's polarization) or an already computed transmission.
    """
    if isinstance(chain, ComponentChain):
        chain = chain_transmission(chain, polarization)
    return float(chain) * detector_efficiency
