#!/usr/bin/env python3
"""Regenerate the shipped example configs in configs/.

case1.json  — three coupled LTI double-integrator-like subsystems, infinite
              horizon (state couplings only).
case2.json  — three coupled LTV subsystems, horizon 15, with shrinking /
              breathing state bounds given by closed-form schedules.
case3-template.json — parameters of the random geometric family plus the
              coupling-strength schedule keyed by total state dimension.
"""

import json
import math
from pathlib import Path

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def zono(center, gens):
    return {"center": center, "generators": gens}


def diag_zono(values):
    n = len(values)
    gens = [[values[i] if i == j else 0.0 for j in range(n)] for i in range(n)]
    return zono([0.0] * n, gens)


def case1():
    A11 = [[1.0, 1.1], [0.0, 1.0]]
    A22 = [[1.0, 1.1], [0.0, 1.0]]
    A33 = [[1.0, 1.1], [1.0, 1.0]]
    B = [[0.0], [0.1]]
    X = diag_zono([1.0, 1.0])
    U = zono([0.0], [[10.0]])
    D = diag_zono([0.02, 0.02])
    subsystems = [
        {"id": 1, "A": A11, "B": B, "X": X, "U": U, "D": D,
         "couplings": [
             {"to": 2, "A": [[0.1, 0.01], [0.1, 0.01]]},
             {"to": 3, "A": [[0.8, 0.1], [0.8, 0.1]]},
         ]},
        {"id": 2, "A": A22, "B": B, "X": X, "U": U, "D": D,
         "couplings": [
             {"to": 1, "A": [[0.1, 0.01], [0.1, 0.01]]},
             {"to": 3, "A": [[0.4, 0.01], [0.4, 0.01]]},
         ]},
        {"id": 3, "A": A33, "B": B, "X": X, "U": U, "D": D,
         "couplings": [
             {"to": 1, "A": [[0.02, 0.0001], [0.02, 0.0001]]},
             {"to": 2, "A": [[0.01, 0.0001], [0.01, 0.0001]]},
         ]},
    ]
    return {"mode": "infinite", "subsystems": subsystems}


def case2():
    h = 15
    A = [[1.0, 1.1], [0.0, 1.0]]
    B = [[0.0], [0.1]]
    C = [[0.002, 0.002], [0.002, 0.002]]
    U = zono([0.0], [[10.0]])
    D = diag_zono([0.4, 0.4])
    # The second radius must shrink but stay clear of the per-step
    # disturbance injection (0.4), which caps how fast any bound can close.
    x1 = [diag_zono([5.0 - math.pi * t / 15.0, 6.0 - 11.0 * math.pi * t / 240.0])
          for t in range(h + 1)]
    x2 = [diag_zono([5.0 - 2.0 * math.sin(math.pi * t / 8.0),
                     6.0 - 5.5 * math.sin(math.pi * t / 20.0)])
          for t in range(h + 1)]
    x3 = [diag_zono([5.0 - t / 5.0, 5.0 - t / 5.0]) for t in range(h + 1)]
    subsystems = [
        {"id": 1, "A": A, "B": B, "X": x1, "U": U, "D": D,
         "couplings": [{"to": 2, "A": C}]},
        {"id": 2, "A": A, "B": B, "X": x2, "U": U, "D": D,
         "couplings": [{"to": 1, "A": C}, {"to": 3, "A": C}]},
        {"id": 3, "A": A, "B": B, "X": x3, "U": U, "D": D,
         "couplings": [{"to": 2, "A": C}]},
    ]
    return {"mode": "finite", "horizon": h, "subsystems": subsystems}


def case3_template():
    return {
        "field_size": 100.0,
        "radius": 10.0,
        "template": {
            "A_ii": [[1.0, 1.2], [0.0, 1.0]],
            "B_ii": [[0.0], [0.2]],
            "X": zono([0.0, 0.0], [[10.0, 0.0, 10.0], [0.0, 10.0, -10.0]]),
            "U": zono([0.0], [[10.0]]),
            "D": diag_zono([0.2, 0.2]),
        },
        # coupling strength by total state dimension (2 * number of subsystems)
        "lambda_schedule": {
            "10": 1.0, "20": 0.1, "40": 0.1, "60": 0.1, "80": 0.1, "100": 0.1,
            "200": 0.05, "400": 0.05, "500": 0.05, "1000": 0.01,
            "2000": 0.001, "4000": 0.001, "10000": 0.0001, "20000": 0.00001,
        },
    }


def main():
    CONFIGS.mkdir(exist_ok=True)
    (CONFIGS / "case1.json").write_text(json.dumps(case1(), indent=1) + "\n")
    (CONFIGS / "case2.json").write_text(json.dumps(case2(), indent=1) + "\n")
    (CONFIGS / "case3-template.json").write_text(
        json.dumps(case3_template(), indent=1) + "\n")
    print(f"wrote configs to {CONFIGS}")


if __name__ == "__main__":
    main()
