#!/usr/bin/env python3
"""Regenerate tests/data/formula_reference.json.

Evaluates the trap-probability inverse and the renormalization bound at 80
decimal digits (mpmath) on seeded random tuples plus the two hand-checkable
rows, and freezes the f64-rounded expected values. Inputs are Python floats
(exact IEEE doubles), so the Rust evaluation sees bit-identical arguments.

Run from the repository root:  python3 tools/gen_formula_reference.py
"""

import json
import math
import random
from pathlib import Path

from mpmath import mp, mpf, exp, log, log1p, sqrt, floor

mp.dps = 80

OUT = Path(__file__).resolve().parent.parent / "crates" / "core" / "tests" / "data" / "formula_reference.json"

rng = random.Random(20260825)


def delta_inverse_mp(m, l, big_h, small_h, gamma1):
    m, l, big_h, small_h, gamma1 = map(mpf, (m, l, big_h, small_h, gamma1))
    a = gamma1 * m / (32 * l)
    x = big_h * l / (2 * small_h * m) - 4 / gamma1
    if x < 0:
        x = mpf(0)
    ln1 = -a
    ln2 = log(10 * m / (gamma1 * l)) - a * x * x
    value = exp(ln1) + exp(ln2)
    return value, log(value)


def lemma1_mp(rho, p, m, l, big_h, kappa, delta, d):
    rho, p, m, l, big_h, kappa, delta = map(mpf, (rho, p, m, l, big_h, kappa, delta))
    ln_kappa_inv = -log(kappa)
    m_bar = floor(m ** 3 / (32 * big_h))
    if rho == 0:
        t1 = mpf(0)
    else:
        t1 = 2 * rho ** (m / (2 * l)) / (1 - sqrt(rho))
    x = p - (7 * m / m_bar) * (ln_kappa_inv / log(delta))
    if x < 0:
        x = mpf(0)
    t2 = 2 * d * exp((m / 2) * ln_kappa_inv - (m_bar / 2) * x * x)
    value = kappa ** -2 * (t1 + t2)
    return value, log(value)


def f64(x):
    v = float(x)
    assert math.isfinite(v), f"fixture value left f64 range: {x}"
    return v


def sample_delta_row():
    while True:
        m = rng.uniform(50.0, 5000.0)
        l = rng.uniform(1.0, min(50.0, m / 10.0))
        gamma1 = rng.uniform(0.01, 2.0)
        small_h = rng.uniform(1.0, 100.0)
        big_h = rng.uniform(2 * small_h, max(4 * small_h, m * m / 4.0))
        a = gamma1 * m / (32.0 * l)
        if a > 500.0:
            continue
        # keep clear of the hinge (x = 0) so both evaluations take one branch
        x = big_h * l / (2.0 * small_h * m) - 4.0 / gamma1
        if abs(x) < 1e-6:
            continue
        value, ln = delta_inverse_mp(m, l, big_h, small_h, gamma1)
        if not (mpf("1e-300") < value < mpf("1e300")):
            continue
        return {
            "m": m, "l": l, "big_h": big_h, "small_h": small_h, "gamma1": gamma1,
            "value": f64(value), "ln": f64(ln),
        }


def sample_lemma1_row():
    while True:
        rho = rng.uniform(0.01, 0.95)
        p = rng.uniform(0.0, 1.0)
        m = rng.uniform(50.0, 300.0)
        l = rng.uniform(1.0, 20.0)
        d = rng.choice([2, 4, 6, 8])
        kappa = 1.0 / (4.0 * d)
        big_h = rng.uniform(m * m / 100.0, m ** 3 / 33.0)
        delta = math.exp(rng.uniform(0.001, 10.0))
        mbar_f64 = math.floor(m ** 3 / (32.0 * big_h))
        if mbar_f64 < 1:
            continue
        # resample near floor boundaries (f64 vs mp could disagree)
        frac = (m ** 3 / (32.0 * big_h)) % 1.0
        if frac < 1e-6 or frac > 1 - 1e-6:
            continue
        x = p - (7.0 * m / mbar_f64) * (math.log(1.0 / kappa) / math.log(delta))
        if abs(x) < 1e-6:
            continue
        value, ln = lemma1_mp(rho, p, m, l, big_h, kappa, delta, d)
        if not (mpf("1e-300") < value < mpf("1e300")):
            continue
        if int(floor(mpf(m) ** 3 / (32 * mpf(big_h)))) != mbar_f64:
            continue
        return {
            "rho": rho, "p": p, "m": m, "l": l, "big_h": big_h,
            "kappa": kappa, "delta": delta, "d": d,
            "value": f64(value), "ln": f64(ln),
        }


def hand_rows():
    rows = []
    # a = 1, hinge inactive: e^{-1} + 320
    v, ln = delta_inverse_mp(320.0, 10.0, 256.0, 1.0, 1.0)
    assert abs(v - (exp(mpf(-1)) + 320)) < mpf("1e-70")
    rows.append({"m": 320.0, "l": 10.0, "big_h": 256.0, "small_h": 1.0, "gamma1": 1.0,
                 "value": f64(v), "ln": f64(ln), "hand": "exp(-1) + 320"})
    # a = 10, x = 1: (1 + 3200) e^{-10}
    v, ln = delta_inverse_mp(3200.0, 10.0, 3200.0, 1.0, 1.0)
    assert abs(v - 3201 * exp(mpf(-10))) < mpf("1e-70")
    rows.append({"m": 3200.0, "l": 10.0, "big_h": 3200.0, "small_h": 1.0, "gamma1": 1.0,
                 "value": f64(v), "ln": f64(ln), "hand": "3201 exp(-10)"})
    return rows


def main():
    data = {
        "generator": "tools/gen_formula_reference.py",
        "precision_digits": 80,
        "seed": 20260825,
        "delta_inverse": hand_rows() + [sample_delta_row() for _ in range(50)],
        "lemma1": [sample_lemma1_row() for _ in range(50)],
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(data, indent=1) + "\n")
    print(f"wrote {OUT} ({len(data['delta_inverse'])} delta rows, {len(data['lemma1'])} lemma1 rows)")


if __name__ == "__main__":
    main()
