#!/usr/bin/env python3
"""Regenerate tests/data/gamma_reference.json.

Freezes Green-weight sums S(d, L, W) = sum_x g(0,x)^beta for the symmetric
walk on W-periodic slabs, computed by an independent route (transverse
Fourier modes + batched tridiagonal solves) rather than the crate's
iterative solver. beta = 2/(2-alpha) with alpha = 1 - 1/r at r = 4.

Run from the repository root:  python3 tools/gen_gamma_reference.py
"""

import json
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parent.parent / "crates" / "core" / "tests" / "data" / "gamma_reference.json"

ALPHA = 1.0 - 1.0 / 4.0
BETA = 2.0 / (2.0 - ALPHA)

# (d, L, W): the small dense-checkable case, the d=4 slope ladder with the
# W ~ 3L transverse policy, and the d=5 stabilization pair.
CASES = [
    (2, 2, 4),
    (4, 3, 10),
    (4, 5, 16),
    (4, 8, 24),
    (4, 12, 36),
    (5, 8, 16),
    (5, 12, 26),
]


def gamma_sum(d, L, W, beta):
    n1 = 2 * L  # interior layers x1 = -L .. L-1; absorbed at -L-1 and L
    i0 = L  # index of x1 = 0
    ks = 2.0 * np.pi * np.arange(W) / W
    shape = (W,) * (d - 1)
    mu = np.zeros(shape)
    for axis in range(d - 1):
        c = np.cos(ks)
        mu += c.reshape((1,) * axis + (W,) + (1,) * (d - 2 - axis))
    mu /= d
    mu_flat = mu.ravel()
    Wt = mu_flat.size
    a = 1.0 - mu_flat
    b = -1.0 / (2 * d)
    cp = np.zeros((n1, Wt))
    dp = np.zeros((n1, Wt))
    cp[0] = b / a
    dp[0] = (1.0 if i0 == 0 else 0.0) / a
    for i in range(1, n1):
        denom = a - b * cp[i - 1]
        cp[i] = b / denom
        dp[i] = ((1.0 if i == i0 else 0.0) - b * dp[i - 1]) / denom
    gh = np.zeros((n1, Wt))
    gh[n1 - 1] = dp[n1 - 1]
    for i in range(n1 - 2, -1, -1):
        gh[i] = dp[i] - cp[i] * gh[i + 1]
    # per-layer inverse FFT over the transverse torus; g >= 0 up to rounding
    S = 0.0
    g0 = None
    for i in range(n1):
        layer = np.fft.ifftn(gh[i].reshape(shape)).real * 1.0
        layer = np.maximum(layer, 0.0)
        S += float(np.sum(layer ** beta))
        if i == i0:
            g0 = float(layer.flat[0])
    return S, g0


def main():
    rows = []
    for d, L, W in CASES:
        s, g0 = gamma_sum(d, L, W, BETA)
        rows.append({"d": d, "l": L, "w": W, "beta": BETA, "sum": s, "g_origin": g0})
        print(f"d={d} L={L} W={W}: S = {s:.12f}, g(0,0) = {g0:.12f}")
    data = {
        "generator": "tools/gen_gamma_reference.py",
        "alpha": ALPHA,
        "beta": BETA,
        "rows": rows,
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(data, indent=1) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
