"""Brute-force 2D overlap integral between elliptical Gaussian fields.

Power coupling |<E1|E2>|^2 / (<E1|E1><E2|E2>) evaluated by Simpson
quadrature on a fine square grid. Does not import pdcsim.

    python oracles/overlap_oracle.py  ->  tests/fixtures/overlap_oracle.json
"""
import json
from pathlib import Path

import numpy as np
from scipy.integrate import simpson

# 1/e^2 intensity radii in um (half of the measured full widths / MFD)
CASES = {
    "te_vs_fiber": ((3.5, 2.35), (3.04, 3.04)),
    "tm_vs_fiber": ((2.65, 1.7), (3.04, 3.04)),
    "te_vs_tm": ((3.5, 2.35), (2.65, 1.7)),
}


def field(x, y, wx, wy):
    return np.exp(-(x**2) / wx**2 - y**2 / wy**2)


def overlap(a, b, half_width=25.0, points=4001):
    x = np.linspace(-half_width, half_width, points)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    ea = field(xx, yy, *a)
    eb = field(xx, yy, *b)

    def integrate(z):
        return simpson(simpson(z, x=x, axis=1), x=x)

    return integrate(ea * eb) ** 2 / (integrate(ea**2) * integrate(eb**2))


def main():
    out = {name: {"a": a, "b": b, "overlap": float(overlap(a, b))} for name, (a, b) in CASES.items()}
    path = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "overlap_oracle.json"
    path.write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    print(json.dumps(out, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
