"""Independent high-precision evaluation of the congruent LiNbO3 dispersion
and the quasi-phasematching quantities derived from it.

Written as a step-by-step "spreadsheet": coefficients are re-typed from
Edwards & Lawrence (1984), every quantity is computed with mpmath at 40
digits, roots are found by plain bisection. Does not import pdcsim.

    python oracles/sellmeier_oracle.py  ->  tests/fixtures/sellmeier_oracle.json
"""
import json
from pathlib import Path

import mpmath as mp

mp.mp.dps = 40

# (A1, A2, A3, A4, B1, B2, B3), n^2 = A1 + (A2+B1 F)/(l^2-(A3+B2 F)^2) + B3 F - A4 l^2
COEF = {
    "ordinary": ("4.9048", "0.11775", "0.21802", "0.027153", "2.2314e-8", "-2.9671e-8", "2.1429e-8"),
    "extraordinary": ("4.5820", "0.099169", "0.21090", "0.021940", "5.2716e-8", "-4.9143e-8", "2.2971e-7"),
}

POLING_UM = mp.mpf("9.08")
OBSERVED_NM = mp.mpf("1558.29")


def n(axis, lam_um, temp_c):
    a1, a2, a3, a4, b1, b2, b3 = (mp.mpf(c) for c in COEF[axis])
    lam = mp.mpf(lam_um)
    t = mp.mpf(temp_c)
    f = (t - mp.mpf("24.5")) * (t + mp.mpf("24.5") + 546)
    n2 = a1 + (a2 + b1 * f) / (lam**2 - (a3 + b2 * f) ** 2) + b3 * f - a4 * lam**2
    return mp.sqrt(n2)


def ng_fd(axis, lam_um, temp_c, h="1e-4"):
    h = mp.mpf(h)
    lam = mp.mpf(lam_um)
    dndl = (n(axis, lam + h, temp_c) - n(axis, lam - h, temp_c)) / (2 * h)
    return n(axis, lam, temp_c) - lam * dndl


def mismatch(lp_nm, ls_nm, li_nm, temp_c, offset_e=0, period_um=POLING_UM):
    """rad/um; pump and signal ordinary, idler extraordinary."""
    lp = mp.mpf(lp_nm) / 1000
    ls = mp.mpf(ls_nm) / 1000
    li = mp.mpf(li_nm) / 1000
    kp = 2 * mp.pi * n("ordinary", lp, temp_c) / lp
    ks = 2 * mp.pi * n("ordinary", ls, temp_c) / ls
    ki = 2 * mp.pi * (n("extraordinary", li, temp_c) + offset_e) / li
    return kp - ks - ki - 2 * mp.pi / mp.mpf(period_um)


def bisect(func, lo, hi, iters=200):
    lo, hi = mp.mpf(lo), mp.mpf(hi)
    flo = func(lo)
    for _ in range(iters):
        mid = (lo + hi) / 2
        fm = func(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return (lo + hi) / 2


def degenerate(temp_c, offset_e=0):
    return bisect(lambda lam: mismatch(lam / 2, lam, lam, temp_c, offset_e), 1400, 1700)


def main():
    out = {}
    out["n_e_1550_25"] = float(n("extraordinary", "1.55", 25))
    out["n_o_1550_25"] = float(n("ordinary", "1.55", 25))
    out["ng_e_1558_25"] = float(ng_fd("extraordinary", "1.558", 25))
    out["ng_o_0779_25"] = float(ng_fd("ordinary", "0.779", 25))

    out["degenerate_uncalibrated_25_nm"] = float(degenerate(25))

    offset = bisect(lambda d: mismatch(OBSERVED_NM / 2, OBSERVED_NM, OBSERVED_NM, 25, d), "-0.05", "0.05")
    out["calibrated_offset_e"] = float(offset)

    lp = OBSERVED_NM / 2
    ls = OBSERVED_NM + 1
    li = 1 / (1 / lp - 1 / ls)
    out["perturbed"] = {
        "pump_nm": float(lp),
        "signal_nm": float(ls),
        "idler_nm": float(li),
        "mismatch_rad_per_um": float(mismatch(lp, ls, li, 25, offset)),
    }

    d25 = degenerate(25, offset)
    d70 = degenerate(70, offset)
    out["degenerate_calibrated_25_nm"] = float(d25)
    out["degenerate_calibrated_70_nm"] = float(d70)
    out["degeneracy_shift_25_to_70_nm"] = float(d70 - d25)

    # poling period for the nondegenerate 1540/1577 nm pair, zero offsets
    ls, li = mp.mpf(1540), mp.mpf(1577)
    lp = 1 / (1 / ls + 1 / li)
    dk_material = mismatch(lp, ls, li, 25, 0, period_um=mp.inf)
    out["nondegenerate_period"] = {
        "pump_nm": float(lp),
        "signal_nm": 1540.0,
        "idler_nm": 1577.0,
        "period_um": float(2 * mp.pi / dk_material),
    }
    dk_deg = mismatch(OBSERVED_NM / 2, OBSERVED_NM, OBSERVED_NM, 25, 0, period_um=mp.inf)
    out["degenerate_period_um"] = float(2 * mp.pi / dk_deg)

    # sinc^2(x) = 1/2
    out["sinc_half_root"] = float(mp.findroot(lambda x: (mp.sin(x) / x) ** 2 - mp.mpf(1) / 2, 1.4))

    path = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "sellmeier_oracle.json"
    path.write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    print(json.dumps(out, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
