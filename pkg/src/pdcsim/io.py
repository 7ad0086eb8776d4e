"""Plain-text export and import of curves, spectra, joint spectra and count records.

CSV layouts (all floats written with 17 significant digits so values
round-trip exactly):

* tuning curve: header ``wavelength_nm,normalized_intensity``
* spectrum: header ``wavelength_nm,intensity_per_nm``
* Schmidt amplitudes: header ``schmidt_amplitude``, one value per row
* joint spectral intensity: first row ``signal_nm`` followed by the signal
  axis, second row ``idler_nm`` followed by the idler axis, then one row per
  signal wavelength holding the intensity (1/nm^2) across the idler axis.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .counting import CountRecord
from .jsa import JointSpectralAmplitude, SchmidtDecomposition, SpectralGridAxes, Spectrum
from .phasematch import TuningCurve

_FMT = "%.17g"


def _write_columns(path, header: list[str], columns) -> Path:
    path = Path(path)
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(path, data, delimiter=",", header=",".join(header), comments="", fmt=_FMT)
    return path


def _read_columns(path, header: list[str]) -> np.ndarray:
    with open(path, newline="") as fh:
        first = next(csv.reader(fh))
    if first != header:
        raise ValueError(f"{path}: expected header {header}, found {first}")
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def write_tuning_curve(path, curve: TuningCurve) -> Path:
    return _write_columns(path, ["wavelength_nm", "normalized_intensity"], [curve.wavelength_nm, curve.intensity])


def read_tuning_curve(path) -> TuningCurve:
    data = _read_columns(path, ["wavelength_nm", "normalized_intensity"])
    return TuningCurve(data[:, 0], data[:, 1])


def write_spectrum(path, spectrum: Spectrum) -> Path:
    return _write_columns(path, ["wavelength_nm", "intensity_per_nm"], [spectrum.wavelength_nm, spectrum.intensity])


def read_spectrum(path) -> Spectrum:
    data = _read_columns(path, ["wavelength_nm", "intensity_per_nm"])
    return Spectrum(data[:, 0], data[:, 1])


def write_schmidt(path, decomposition: SchmidtDecomposition) -> Path:
    return _write_columns(path, ["schmidt_amplitude"], [decomposition.amplitudes])


def read_schmidt(path) -> SchmidtDecomposition:
    return SchmidtDecomposition(_read_columns(path, ["schmidt_amplitude"])[:, 0])


def write_jsi(path, jsa: JointSpectralAmplitude) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        for label, axis in (("signal_nm", jsa.axes.signal_nm), ("idler_nm", jsa.axes.idler_nm)):
            fh.write(label + "," + ",".join(_FMT % v for v in axis) + "\n")
        np.savetxt(fh, jsa.intensity, delimiter=",", fmt=_FMT)
    return path


def read_jsi(path) -> tuple[SpectralGridAxes, np.ndarray]:
    """Axes and intensity matrix (rows = signal) from a JSI CSV."""
    with open(path) as fh:
        rows = [fh.readline().rstrip("\n").split(",") for _ in range(2)]
    if rows[0][0] != "signal_nm" or rows[1][0] != "idler_nm":
        raise ValueError(f"{path}: missing signal_nm / idler_nm axis rows")
    axes = SpectralGridAxes(np.array(rows[0][1:], dtype=float), np.array(rows[1][1:], dtype=float))
    jsi = np.loadtxt(path, delimiter=",", skiprows=2, ndmin=2)
    if jsi.shape != axes.shape:
        raise ValueError(f"{path}: intensity shape {jsi.shape} does not match axes {axes.shape}")
    return axes, jsi


def write_count_record(path, record: CountRecord) -> Path:
    path = Path(path)
    path.write_text(record.to_json())
    return path


def read_count_record(path) -> CountRecord:
    return CountRecord.from_json(Path(path).read_text())


def write_json(path, document: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(document, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"cannot serialize {type(value).__name__}")
