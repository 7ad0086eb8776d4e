"""Small numeric helpers shared by the spectral modules."""

from __future__ import annotations

import numpy as np

# nm * THz
C_NM_THZ = 299792.458


class FWHMError(ValueError):
    pass


def fwhm(x, y) -> float:
    """Full width at half maximum of the main peak of ``y(x)``.

    Walks outward from the maximum to the first samples below half maximum
    and interpolates linearly between the straddling pairs. ``x`` must be
    monotone (either direction).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1D arrays of equal length")
    peak = int(np.argmax(y))
    ymax = y[peak]
    if not np.isfinite(ymax) or ymax <= 0:
        raise FWHMError("spectrum is empty or all-zero; FWHM undefined")
    half = 0.5 * ymax

    below = np.nonzero(y[:peak] < half)[0]
    if below.size == 0:
        raise FWHMError("half maximum not reached on the low side of the peak")
    i = below[-1]
    left = x[i] + (half - y[i]) * (x[i + 1] - x[i]) / (y[i + 1] - y[i])

    below = np.nonzero(y[peak + 1 :] < half)[0]
    if below.size == 0:
        raise FWHMError("half maximum not reached on the high side of the peak")
    j = peak + 1 + below[0]
    right = x[j - 1] + (half - y[j - 1]) * (x[j] - x[j - 1]) / (y[j] - y[j - 1])
    return float(abs(right - left))


def nm_to_thz(wavelength_nm):
    return C_NM_THZ / np.asarray(wavelength_nm, dtype=float)


def bandwidth_nm_to_thz(center_nm: float, fwhm_nm: float) -> float:
    """Frequency width spanned by a wavelength interval centred on ``center_nm``."""
    return C_NM_THZ / (center_nm - fwhm_nm / 2) - C_NM_THZ / (center_nm + fwhm_nm / 2)


def bandwidth_thz_to_nm(center_nm: float, fwhm_thz: float) -> float:
    nu0 = C_NM_THZ / center_nm
    return C_NM_THZ / (nu0 - fwhm_thz / 2) - C_NM_THZ / (nu0 + fwhm_thz / 2)
