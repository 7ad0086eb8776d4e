import json
from pathlib import Path

import pytest

from pdcsim import jsa
from pdcsim.phasematch import WaveguideSpec, calibrate_offset

FIXTURES = Path(__file__).parent / "fixtures"
OBSERVED_DEGENERACY_NM = 1558.29


def load_fixture(name):
    return json.loads((FIXTURES / name).read_text())


@pytest.fixture(scope="session")
def sellmeier_oracle():
    return load_fixture("sellmeier_oracle.json")


@pytest.fixture(scope="session")
def overlap_oracle():
    return load_fixture("overlap_oracle.json")


@pytest.fixture(scope="session")
def fock_oracle():
    return load_fixture("fock_oracle.json")


@pytest.fixture(scope="session")
def bulk_spec():
    return WaveguideSpec()


@pytest.fixture(scope="session")
def calibrated_spec(bulk_spec):
    return calibrate_offset(bulk_spec, OBSERVED_DEGENERACY_NM)


@pytest.fixture(scope="session")
def reference_pump():
    return jsa.PumpEnvelope(center_nm=OBSERVED_DEGENERACY_NM / 2)


@pytest.fixture(scope="session")
def reference_axes():
    return jsa.SpectralGridAxes.centered(OBSERVED_DEGENERACY_NM, OBSERVED_DEGENERACY_NM, 8.0, 512)


@pytest.fixture(scope="session")
def reference_jsa(calibrated_spec, reference_pump, reference_axes):
    return jsa.build_jsa(calibrated_spec, reference_pump, reference_axes)


@pytest.fixture(scope="session")
def dwdm():
    return jsa.SpectralFilter(center_nm=OBSERVED_DEGENERACY_NM, fwhm_nm=1.6, peak_transmission=0.86)


@pytest.fixture(scope="session")
def filtered_jsa(reference_jsa, dwdm):
    return jsa.apply_filter(reference_jsa, dwdm, "signal")


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion, plus the sub-checks behind it."""
    reports = [
        r for r in terminalreporter.stats.get("passed", []) + terminalreporter.stats.get("failed", [])
        if r.when == "call" and "test_acceptance.py::" in r.nodeid
    ]
    if not reports:
        return
    terminalreporter.section("acceptance criteria")
    for r in sorted(reports, key=lambda r: r.nodeid):
        props = dict(r.user_properties)
        label = props.get("criterion", r.nodeid.split("::")[-1])
        terminalreporter.write_line(f"{'PASS' if r.passed else 'FAIL'}  {label}")
        for line in props.get("details", []):
            terminalreporter.write_line(f"        {line}")
