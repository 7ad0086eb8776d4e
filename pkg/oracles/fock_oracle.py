"""Truncated-Fock enumeration of click probabilities for the heralded g2
arrangement: signal -> detector 3, idler -> splitter -> detectors 1 and 2.

Single-mode thermal pair statistics P(n) = m^n / (1+m)^(n+1), truncated
at n <= 3 pairs. Every photon's fate is enumerated explicitly (lost /
detected, and which splitter port for idlers); threshold detectors click
on one or more photons. Does not import pdcsim.

    python oracles/fock_oracle.py  ->  tests/fixtures/fock_oracle.json
"""
import itertools
import json
from fractions import Fraction
from pathlib import Path

MAX_PAIRS = 3


def thermal(m, n):
    return m**n / (1 + m) ** (n + 1)


def click_probabilities(mean, eta_s, eta_i, ratio, det=1.0):
    # idler photon fates: 0 lost, 1 -> d1 detected, 2 -> d2 detected
    p_fate_i = {1: eta_i * ratio * det, 2: eta_i * (1 - ratio) * det}
    p_fate_i[0] = 1 - p_fate_i[1] - p_fate_i[2]
    p_sig = {1: eta_s * det, 0: 1 - eta_s * det}
    tally = {"p3": 0.0, "p13": 0.0, "p23": 0.0, "p123": 0.0, "p1": 0.0, "p2": 0.0}
    for n in range(MAX_PAIRS + 1):
        pn = thermal(mean, n)
        for sig in itertools.product((0, 1), repeat=n):
            ps = 1.0
            for s in sig:
                ps *= p_sig[s]
            c3 = any(sig)
            for idl in itertools.product((0, 1, 2), repeat=n):
                pi = 1.0
                for f in idl:
                    pi *= p_fate_i[f]
                c1 = 1 in idl
                c2 = 2 in idl
                w = pn * ps * pi
                tally["p1"] += w * c1
                tally["p2"] += w * c2
                tally["p3"] += w * c3
                tally["p13"] += w * (c1 and c3)
                tally["p23"] += w * (c2 and c3)
                tally["p123"] += w * (c1 and c2 and c3)
    tally["heralded_g2"] = tally["p123"] * tally["p3"] / (tally["p13"] * tally["p23"])
    return tally


CASES = [
    {"mean": 0.02, "eta_s": 1.0, "eta_i": 1.0, "ratio": 0.5},
    {"mean": 0.05, "eta_s": 1.0, "eta_i": 1.0, "ratio": 0.5},
    {"mean": 0.05, "eta_s": 0.5, "eta_i": 0.6, "ratio": 0.5},
]


def main():
    out = []
    for case in CASES:
        res = click_probabilities(**case)
        out.append({**case, **res})
    # sanity: exact rational check of the truncation order for one case
    m = Fraction(1, 20)
    tail = 1 - sum(m**n / (1 + m) ** (n + 1) for n in range(MAX_PAIRS + 1))
    meta = {"max_pairs": MAX_PAIRS, "truncated_tail_mean_0.05": float(tail)}
    path = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "fock_oracle.json"
    path.write_text(json.dumps({"meta": meta, "cases": out}, indent=2) + "\n")
    print(json.dumps({"meta": meta, "cases": out}, indent=2))


if __name__ == "__main__":
    main()
