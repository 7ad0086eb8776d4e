import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdcsim.phasematch import (
    CalibrationError,
    PhasematchError,
    PhasematchPoint,
    PolarizationMap,
    WaveguideSpec,
    calibrate_offset,
    find_degenerate_wavelength,
    find_poling_period,
    pm_amplitude,
    qpm_mismatch,
    shg_tuning_curve,
)

TARGET = 1558.29


# --- qpm_mismatch ----------------------------------------------------------


def test_mismatch_vanishes_with_designed_period():
    period = find_poling_period(TARGET / 2, TARGET, TARGET, 25.0)
    spec = WaveguideSpec(poling_period_um=period)
    assert abs(qpm_mismatch(spec, TARGET / 2, TARGET, TARGET)) < 1e-10


def test_calibrated_spec_phasematched_at_observed_degeneracy(calibrated_spec):
    assert abs(qpm_mismatch(calibrated_spec, 779.145, TARGET, TARGET)) < 1e-9


def test_perturbed_signal_matches_spreadsheet_oracle(calibrated_spec, sellmeier_oracle):
    p = sellmeier_oracle["perturbed"]
    dk = qpm_mismatch(calibrated_spec, p["pump_nm"], p["signal_nm"], p["idler_nm"])
    assert dk == pytest.approx(p["mismatch_rad_per_um"], rel=1e-6, abs=1e-10)


def test_energy_violation_rejected(bulk_spec):
    with pytest.raises(ValueError, match="energy conservation"):
        qpm_mismatch(bulk_spec, 780.0, 1550.0, 1550.0)


def test_mismatch_vectorizes(calibrated_spec):
    ls = np.linspace(1550, 1566, 5)
    li = 1 / (1 / 779.145 - 1 / ls)
    dk = qpm_mismatch(calibrated_spec, 779.145, ls, li)
    assert dk.shape == (5,)
    assert dk[2] == pytest.approx(float(qpm_mismatch(calibrated_spec, 779.145, ls[2], li[2])))


@settings(max_examples=40, deadline=None)
@given(st.floats(1500, 1620), st.floats(20, 120))
def test_mismatch_symmetric_under_daughter_exchange(signal_nm, temp):
    pump = 779.145
    idler = 1 / (1 / pump - 1 / signal_nm)
    spec = WaveguideSpec(temperature_c=temp)
    swapped = spec.replace(polarization=spec.polarization.swapped())
    assert qpm_mismatch(spec, pump, signal_nm, idler) == pytest.approx(
        qpm_mismatch(swapped, pump, idler, signal_nm), abs=1e-12
    )


def test_phasematch_point_energy_conservation():
    p = PhasematchPoint.from_pump_and_signal(None, 779.145, 1560.0)
    assert abs(1 / p.pump_nm - 1 / p.signal_nm - 1 / p.idler_nm) * p.pump_nm < 1e-12
    with pytest.raises(ValueError):
        PhasematchPoint(779.0, 1560.0, 1560.0)


# --- pm_amplitude ----------------------------------------------------------


def test_pm_amplitude_on_phasematch_is_one():
    assert pm_amplitude(0.0, 21.0) == pytest.approx(1 + 0j)


def test_pm_amplitude_first_zero():
    L = 21.0
    dk = 2 * np.pi / (L * 1000)
    assert abs(pm_amplitude(dk, L)) < 1e-15


def test_pm_amplitude_half_power_point(sellmeier_oracle):
    L = 21.0
    x = sellmeier_oracle["sinc_half_root"]
    assert x == pytest.approx(1.3916, abs=1e-4)
    dk = 2 * x / (L * 1000)
    assert abs(pm_amplitude(dk, L)) ** 2 == pytest.approx(0.5, abs=1e-4)


@given(st.floats(-1e-2, 1e-2), st.floats(1.0, 50.0))
def test_pm_amplitude_bounded(dk, L):
    assert abs(pm_amplitude(dk, L)) <= 1 + 1e-12


# --- tuning curve ------------------------------------------------------------


def test_shg_peak_at_observed_degeneracy(calibrated_spec):
    curve = shg_tuning_curve(calibrated_spec, 1555, 1561.5, 2001)
    step = 6.5 / 2000
    assert abs(curve.peak_nm - TARGET) <= step


def test_shg_fwhm_near_observed_bandwidth(calibrated_spec):
    curve = shg_tuning_curve(calibrated_spec, 1555, 1561.5, 2001)
    assert curve.fwhm_nm == pytest.approx(0.31, rel=0.30)


def test_shg_fwhm_inverse_length_scaling(calibrated_spec):
    full = shg_tuning_curve(calibrated_spec, 1552, 1565, 8001).fwhm_nm
    half = shg_tuning_curve(calibrated_spec.replace(poled_length_mm=10.5), 1552, 1565, 8001).fwhm_nm
    assert half / full == pytest.approx(2.0, rel=0.01)


def test_shg_curve_normalized(calibrated_spec):
    curve = shg_tuning_curve(calibrated_spec, 1556, 1561, 1001)
    assert np.all((curve.intensity >= 0) & (curve.intensity <= 1))
    assert np.count_nonzero(curve.intensity == 1.0) == 1


@pytest.mark.parametrize("start, stop, points", [(1560, 1560, 101), (1561, 1555, 101), (1555, 1561, 2)])
def test_shg_rejects_degenerate_input(calibrated_spec, start, stop, points):
    with pytest.raises(ValueError):
        shg_tuning_curve(calibrated_spec, start, stop, points)


def test_absolute_power_scales_with_square_of_fundamental(calibrated_spec):
    curve = shg_tuning_curve(calibrated_spec, 1556, 1561, 501)
    p1 = curve.absolute_power(0.01, 2.56, 2.1).max()
    p2 = curve.absolute_power(0.02, 2.56, 2.1).max()
    assert p1 == pytest.approx(0.0256 * 1e-4 * 2.1**2)
    assert p2 / p1 == pytest.approx(4.0)


# --- degeneracy, period, calibration ----------------------------------------


def test_uncalibrated_degeneracy_matches_oracle(bulk_spec, sellmeier_oracle):
    assert find_degenerate_wavelength(bulk_spec) == pytest.approx(
        sellmeier_oracle["degenerate_uncalibrated_25_nm"], abs=1e-6
    )


def test_calibration_fixed_point(calibrated_spec):
    assert find_degenerate_wavelength(calibrated_spec) == pytest.approx(TARGET, abs=1e-3)


def test_calibrated_offset_matches_bisection_oracle(calibrated_spec, sellmeier_oracle):
    assert calibrated_spec.offset("extraordinary") == pytest.approx(sellmeier_oracle["calibrated_offset_e"], abs=1e-9)
    assert abs(calibrated_spec.offset("extraordinary")) < 0.05
    assert calibrated_spec.offset("ordinary") == 0.0


def test_calibration_to_current_degeneracy_gives_zero_offset(bulk_spec):
    here = find_degenerate_wavelength(bulk_spec)
    assert abs(calibrate_offset(bulk_spec, here).offset("extraordinary")) < 1e-9


def test_temperature_tuning_matches_oracle(calibrated_spec, sellmeier_oracle):
    hot = find_degenerate_wavelength(calibrated_spec.replace(temperature_c=70.0))
    shift = hot - find_degenerate_wavelength(calibrated_spec)
    assert shift == pytest.approx(sellmeier_oracle["degeneracy_shift_25_to_70_nm"], abs=1e-6)


def test_degenerate_solver_residual(calibrated_spec):
    lam = find_degenerate_wavelength(calibrated_spec)
    assert abs(qpm_mismatch(calibrated_spec, lam / 2, lam, lam)) < 1e-9


def test_no_bracket_raises(bulk_spec):
    with pytest.raises(PhasematchError, match="no phasematching in range"):
        find_degenerate_wavelength(bulk_spec, bracket=(1600, 1700))


def test_degenerate_period_near_fabricated(sellmeier_oracle):
    period = find_poling_period(TARGET / 2, TARGET, TARGET, 25.0)
    assert period == pytest.approx(sellmeier_oracle["degenerate_period_um"], rel=1e-9)
    assert period == pytest.approx(9.08, abs=0.5)


def test_nondegenerate_period_matches_oracle(sellmeier_oracle):
    p = sellmeier_oracle["nondegenerate_period"]
    period = find_poling_period(p["pump_nm"], p["signal_nm"], p["idler_nm"], 25.0)
    assert period == pytest.approx(p["period_um"], rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.floats(1450, 1650), st.floats(10, 150))
def test_period_and_degeneracy_round_trip(lam, temp):
    period = find_poling_period(lam / 2, lam, lam, temp)
    spec = WaveguideSpec(poling_period_um=period, temperature_c=temp)
    assert find_degenerate_wavelength(spec, bracket=(1300, 1800)) == pytest.approx(lam, abs=1e-6)


def test_impossible_qpm_raises():
    # pump pushed onto a strongly lowered extraordinary index: k_p < k_s + k_i
    with pytest.raises(PhasematchError, match="co-propagating QPM impossible"):
        find_poling_period(
            1500.0, 3000.0, 3000.0, 25.0,
            polarization=PolarizationMap(pump="TM", signal="TE", idler="TM"),
            index_offset={"extraordinary": -0.2},
        )


def test_calibration_unreachable(bulk_spec):
    with pytest.raises(CalibrationError):
        calibrate_offset(bulk_spec.replace(poling_period_um=5.0), 1690.0)


def test_calibration_target_outside_bracket(bulk_spec):
    with pytest.raises(CalibrationError, match="outside search range"):
        calibrate_offset(bulk_spec, 1800.0)


# --- spec validation and serialization ---------------------------------------


@pytest.mark.parametrize(
    "kwargs",
    [dict(poled_length_mm=30.0), dict(chip_length_mm=-1.0), dict(poling_period_um=0.0), dict(index_offset={"fast": 0.1})],
)
def test_spec_invariants(kwargs):
    with pytest.raises(ValueError):
        WaveguideSpec(**kwargs)


def test_type_ii_requires_orthogonal_daughters():
    with pytest.raises(ValueError, match="orthogonally polarized"):
        PolarizationMap(signal="TE", idler="TE")


def test_spec_dict_round_trip(calibrated_spec):
    again = WaveguideSpec.from_dict(calibrated_spec.to_dict())
    assert again == calibrated_spec
