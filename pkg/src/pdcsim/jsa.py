"""Joint spectral amplitude of the photon pairs and what follows from it:
filtering, marginals, Schmidt decomposition, purity and coherence time.

Axes are wavelengths in nm. Amplitudes are normalized so that
sum |f|^2 dl_s dl_i = 1 (units 1/nm).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from ._numeric import C_NM_THZ, FWHMError, bandwidth_nm_to_thz, fwhm, nm_to_thz
from .phasematch import WaveguideSpec, material_mismatch, pm_amplitude

__all__ = [
    "FWHMError",
    "JointSpectralAmplitude",
    "PumpEnvelope",
    "SchmidtDecomposition",
    "Spectrum",
    "SpectralFilter",
    "SpectralGridAxes",
    "apply_filter",
    "auto_axes",
    "build_jsa",
    "coherence_time",
    "conditioned_bandwidth",
    "conditioned_idler",
    "fwhm",
    "marginals",
    "max_fiber_distance",
    "purity_from_intensity",
    "schmidt_decompose",
    "temporal_profile",
]

MIN_GRID = 64
MIN_BINS_PER_FWHM = 8


class DecompositionError(RuntimeError):
    pass


class ResolutionError(ValueError):
    pass


@dataclass(frozen=True)
class PumpEnvelope:
    center_nm: float = 779.15
    fwhm_nm: float = 0.3
    shape: str = "gaussian"
    repetition_rate_hz: float = 1e6

    def __post_init__(self):
        if self.fwhm_nm <= 0:
            raise ValueError("pump FWHM must be positive")
        if not 0 < self.fwhm_nm / 2 < self.center_nm:
            raise ValueError("pump FWHM must be smaller than twice its center wavelength")
        if self.repetition_rate_hz <= 0:
            raise ValueError("repetition rate must be positive")
        if self.shape not in ("gaussian", "sech2"):
            raise ValueError(f"pump shape must be 'gaussian' or 'sech2', got {self.shape!r}")

    @property
    def fwhm_thz(self) -> float:
        return bandwidth_nm_to_thz(self.center_nm, self.fwhm_nm)

    def amplitude(self, detuning_thz):
        """Spectral amplitude; its modulus squared has FWHM ``fwhm_nm``."""
        x = np.asarray(detuning_thz, dtype=float) / self.fwhm_thz
        if self.shape == "gaussian":
            return np.exp(-2.0 * np.log(2.0) * x**2)
        # |sech(x/tau)|^2 has FWHM 2 acosh(sqrt 2) tau
        tau = 1.0 / (2.0 * np.arccosh(np.sqrt(2.0)))
        return 1.0 / np.cosh(x / tau)


def _check_uniform(axis: np.ndarray, name: str):
    if axis.ndim != 1 or axis.size < 2:
        raise ValueError(f"{name} axis must be 1D with at least 2 points")
    step = np.diff(axis)
    if np.any(step <= 0):
        raise ValueError(f"{name} axis must be strictly increasing")
    if np.max(np.abs(step - step.mean())) > 1e-9 * abs(step.mean()) + 1e-12:
        raise ValueError(f"{name} axis must be uniformly spaced")


@dataclass(frozen=True)
class SpectralGridAxes:
    signal_nm: np.ndarray
    idler_nm: np.ndarray

    def __post_init__(self):
        for name in ("signal_nm", "idler_nm"):
            arr = np.array(getattr(self, name), dtype=float)
            _check_uniform(arr, name)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def centered(cls, signal_center_nm, idler_center_nm, half_span_nm, points=512):
        s = np.linspace(signal_center_nm - half_span_nm, signal_center_nm + half_span_nm, points)
        i = np.linspace(idler_center_nm - half_span_nm, idler_center_nm + half_span_nm, points)
        return cls(s, i)

    @property
    def signal_step(self) -> float:
        return float(self.signal_nm[1] - self.signal_nm[0])

    @property
    def idler_step(self) -> float:
        return float(self.idler_nm[1] - self.idler_nm[0])

    @property
    def shape(self):
        return (self.signal_nm.size, self.idler_nm.size)

    def axis(self, arm: str) -> np.ndarray:
        if arm == "signal":
            return self.signal_nm
        if arm == "idler":
            return self.idler_nm
        raise ValueError(f"arm must be 'signal' or 'idler', got {arm!r}")


@dataclass(frozen=True)
class Spectrum:
    wavelength_nm: np.ndarray
    intensity: np.ndarray

    @property
    def fwhm_nm(self) -> float:
        return fwhm(self.wavelength_nm, self.intensity)

    @property
    def peak_nm(self) -> float:
        return float(self.wavelength_nm[np.argmax(self.intensity)])


@dataclass(frozen=True)
class JointSpectralAmplitude:
    axes: SpectralGridAxes
    amplitude: np.ndarray
    normalized: bool = False
    filters: tuple = ()

    def __post_init__(self):
        amp = np.array(self.amplitude, dtype=complex)
        if amp.shape != self.axes.shape:
            raise ValueError(f"amplitude shape {amp.shape} does not match axes {self.axes.shape}")
        amp.flags.writeable = False
        object.__setattr__(self, "amplitude", amp)

    @property
    def cell_area(self) -> float:
        return self.axes.signal_step * self.axes.idler_step

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2

    def total_probability(self) -> float:
        return float(np.sum(self.intensity) * self.cell_area)

    def renormalized(self) -> JointSpectralAmplitude:
        norm = self.total_probability()
        if not norm > 0:
            raise ValueError("cannot normalize an all-zero amplitude")
        return dataclasses.replace(self, amplitude=self.amplitude / np.sqrt(norm), normalized=True)

    def transposed(self) -> JointSpectralAmplitude:
        """Exchange the roles of signal and idler."""
        axes = SpectralGridAxes(self.axes.idler_nm, self.axes.signal_nm)
        return dataclasses.replace(self, axes=axes, amplitude=self.amplitude.T)


def build_jsa(spec: WaveguideSpec, pump: PumpEnvelope, axes: SpectralGridAxes, phasematching=None):
    """Pump envelope times phasematching function on the (signal, idler) grid.

    ``phasematching(spec, signal_nm, idler_nm)`` may replace the waveguide
    response, e.g. with a separable stub in tests.
    """
    if min(axes.shape) < MIN_GRID:
        raise ValueError(f"grid must be at least {MIN_GRID}x{MIN_GRID}, got {axes.shape}")
    ls, li = np.meshgrid(axes.signal_nm, axes.idler_nm, indexing="ij")
    nu_s, nu_i = nm_to_thz(ls), nm_to_thz(li)
    detuning = nu_s + nu_i - C_NM_THZ / pump.center_nm
    alpha = pump.amplitude(detuning)
    if phasematching is None:
        lp = C_NM_THZ / (nu_s + nu_i)
        dk = material_mismatch(spec, lp, ls, li) - 2.0 * np.pi / spec.poling_period_um
        phi = pm_amplitude(dk, spec.poled_length_mm)
    else:
        phi = phasematching(spec, ls, li)
    return JointSpectralAmplitude(axes, alpha * phi).renormalized()


@dataclass(frozen=True)
class SpectralFilter:
    """Bandpass with super-Gaussian power transmission T0 exp(-ln2 (2|x|/FWHM)^(2 order)).

    ``flat_top`` is a 4th-order super-Gaussian, ``gaussian`` is order 1.
    """

    center_nm: float
    fwhm_nm: float = 1.6
    peak_transmission: float = 1.0
    profile: str = "flat_top"
    order: int = 4

    def __post_init__(self):
        if not 0 < self.peak_transmission <= 1:
            raise ValueError("peak transmission must lie in (0, 1]")
        if self.fwhm_nm <= 0:
            raise ValueError("filter FWHM must be positive")
        if self.profile not in ("flat_top", "gaussian", "super_gaussian"):
            raise ValueError(f"unknown filter profile {self.profile!r}")
        if self.order < 1:
            raise ValueError("super-Gaussian order must be >= 1")

    @property
    def effective_order(self) -> int:
        return {"flat_top": 4, "gaussian": 1}.get(self.profile, self.order)

    def transmission(self, wavelength_nm):
        x = 2.0 * np.abs(np.asarray(wavelength_nm, dtype=float) - self.center_nm) / self.fwhm_nm
        return self.peak_transmission * np.exp(-np.log(2.0) * x ** (2 * self.effective_order))


def apply_filter(jsa: JointSpectralAmplitude, filt: SpectralFilter, arm: str) -> JointSpectralAmplitude:
    """Multiply the amplitude by sqrt(T) along one arm. Not renormalized."""
    axis = jsa.axes.axis(arm)
    if not axis[0] <= filt.center_nm <= axis[-1]:
        raise ValueError(f"filter center {filt.center_nm} nm outside the {arm} axis")
    root_t = np.sqrt(filt.transmission(axis))
    amp = jsa.amplitude * (root_t[:, None] if arm == "signal" else root_t[None, :])
    return dataclasses.replace(jsa, amplitude=amp, normalized=False, filters=jsa.filters + ((arm, filt),))


def marginals(jsa: JointSpectralAmplitude) -> tuple[Spectrum, Spectrum]:
    jsi = jsa.intensity
    signal = jsi.sum(axis=1) * jsa.axes.idler_step
    idler = jsi.sum(axis=0) * jsa.axes.signal_step
    return Spectrum(jsa.axes.signal_nm, signal), Spectrum(jsa.axes.idler_nm, idler)


@dataclass(frozen=True)
class SchmidtDecomposition:
    amplitudes: np.ndarray

    def __post_init__(self):
        r = np.sort(np.abs(np.asarray(self.amplitudes, dtype=float)))[::-1]
        total = np.sum(r**2)
        if not total > 0:
            raise DecompositionError("all Schmidt amplitudes vanish")
        r = r / np.sqrt(total)
        r.flags.writeable = False
        object.__setattr__(self, "amplitudes", r)

    @property
    def weights(self) -> np.ndarray:
        return self.amplitudes**2

    @property
    def purity(self) -> float:
        return float(np.sum(self.amplitudes**4))

    @property
    def schmidt_number(self) -> float:
        return 1.0 / self.purity

    def mode_means(self, mean_pairs: float) -> np.ndarray:
        return mean_pairs * self.weights


def _schmidt_from_matrix(matrix: np.ndarray) -> SchmidtDecomposition:
    if not np.all(np.isfinite(matrix)):
        raise DecompositionError("amplitude contains non-finite values")
    if not np.any(matrix):
        raise DecompositionError("amplitude is identically zero")
    try:
        s = np.linalg.svd(matrix, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(f"SVD failed: {exc}") from exc
    return SchmidtDecomposition(s)


def schmidt_decompose(jsa: JointSpectralAmplitude) -> SchmidtDecomposition:
    return _schmidt_from_matrix(jsa.amplitude * np.sqrt(jsa.cell_area))


def purity_from_intensity(jsi) -> float:
    """Purity estimated from a joint spectral intensity alone.

    Takes sqrt(JSI) as the amplitude, i.e. assumes a flat spectral phase.
    This is an assumption, not a bound: a real phase can make the true
    purity either higher or lower.
    """
    jsi = np.asarray(jsi, dtype=float)
    if np.any(jsi < 0):
        raise ValueError("joint spectral intensity has negative entries")
    return _schmidt_from_matrix(np.sqrt(jsi)).purity


# --- time domain ---------------------------------------------------------------


@dataclass(frozen=True)
class TemporalProfile:
    time_ps: np.ndarray
    field: np.ndarray
    frequency_thz: np.ndarray
    spectral_amplitude: np.ndarray

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.field) ** 2

    @property
    def fwhm_ps(self) -> float:
        return fwhm(self.time_ps, self.intensity)

    def spectral_energy(self) -> float:
        df = self.frequency_thz[1] - self.frequency_thz[0]
        return float(np.sum(np.abs(self.spectral_amplitude) ** 2) * df)

    def temporal_energy(self) -> float:
        dt = self.time_ps[1] - self.time_ps[0]
        return float(np.sum(self.intensity) * dt)


def temporal_profile(frequency_thz, amplitude, pad_factor: int = 16) -> TemporalProfile:
    """Fourier transform a complex spectral amplitude to the time domain.

    Samples need not be uniform in frequency (a uniform wavelength grid is
    not); they are resampled onto a uniform frequency grid with a cubic
    spline before a zero-padded FFT. Energies satisfy Parseval on that grid.
    """
    nu = np.asarray(frequency_thz, dtype=float)
    amp = np.asarray(amplitude, dtype=complex)
    order = np.argsort(nu)
    nu, amp = nu[order], amp[order]
    grid = np.linspace(nu[0], nu[-1], nu.size)
    if np.allclose(grid, nu, rtol=0, atol=1e-12 * abs(nu[-1])):
        resampled = amp
    else:
        resampled = CubicSpline(nu, amp.real)(grid) + 1j * CubicSpline(nu, amp.imag)(grid)
    df = grid[1] - grid[0]
    n = 1 << int(np.ceil(np.log2(nu.size * pad_factor)))
    field_t = np.fft.fftshift(np.fft.fft(resampled, n)) * df
    dt = 1.0 / (n * df)
    t = (np.arange(n) - n // 2) * dt
    return TemporalProfile(t, field_t, grid, resampled)


def conditioned_idler(jsa: JointSpectralAmplitude, delta_herald: bool = True) -> np.ndarray:
    """Idler amplitude heralded by a signal detection.

    With ``delta_herald`` the signal is projected onto a single frequency
    at its marginal peak; otherwise the square root of the idler marginal
    with flat phase is returned.
    """
    signal, idler = marginals(jsa)
    if delta_herald:
        row = int(np.argmax(signal.intensity))
        return jsa.amplitude[row, :]
    return np.sqrt(idler.intensity).astype(complex)


def conditioned_bandwidth(jsa: JointSpectralAmplitude, delta_herald: bool = True) -> float:
    """FWHM in nm of the heralded idler intensity spectrum."""
    return fwhm(jsa.axes.idler_nm, np.abs(conditioned_idler(jsa, delta_herald)) ** 2)


def coherence_time(jsa: JointSpectralAmplitude, delta_herald: bool = True) -> float:
    """Intensity FWHM (ps) of the heralded idler wavepacket."""
    amp = conditioned_idler(jsa, delta_herald)
    width = fwhm(jsa.axes.idler_nm, np.abs(amp) ** 2)
    bins = width / jsa.axes.idler_step
    if bins < MIN_BINS_PER_FWHM:
        raise ResolutionError(
            f"conditioned spectrum spans {bins:.1f} bins (< {MIN_BINS_PER_FWHM}); refine the grid"
        )
    return temporal_profile(nm_to_thz(jsa.axes.idler_nm), amp).fwhm_ps


def max_fiber_distance(bandwidth_nm: float, dispersion_ps_nm_km: float = 17.0, repetition_rate_hz: float = 1e9) -> float:
    """Fiber length (km) at which dispersive spreading equals the pulse period."""
    if min(bandwidth_nm, dispersion_ps_nm_km, repetition_rate_hz) <= 0:
        raise ValueError("bandwidth, dispersion and repetition rate must be positive")
    period_ps = 1e12 / repetition_rate_hz
    return period_ps / (dispersion_ps_nm_km * bandwidth_nm)


def auto_axes(
    spec: WaveguideSpec,
    pump: PumpEnvelope,
    points: int = 512,
    span_factor: float = 3.0,
    survey_half_span_nm: float = 25.0,
) -> SpectralGridAxes:
    """Grid centred on the marginal peaks, spanning +-span_factor times the wider marginal FWHM."""
    center = 2.0 * pump.center_nm
    survey = SpectralGridAxes.centered(center, center, survey_half_span_nm, 257)
    s, i = marginals(build_jsa(spec, pump, survey))
    half_span = span_factor * max(s.fwhm_nm, i.fwhm_nm)
    return SpectralGridAxes.centered(s.peak_nm, i.peak_nm, half_span, points)

