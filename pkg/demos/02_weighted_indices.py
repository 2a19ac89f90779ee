"""Weighted surrogate indices, tail means, and their dual transforms.

The weighted index reweights a conditional outcome quantile function by the
copula's conditional CDF.  Under independence it is the plain conditional
mean; at the dependence bounds it is a conditional tail mean, whose dual
averages a simple transform of outcome draws.
"""

import numpy as np
from scipy.special import ndtri

from surrosens import (
    CopulaFamily,
    CopulaSpec,
    FRECHET_LOWER,
    FRECHET_UPPER,
    INDEPENDENCE,
    avar,
    dual_transform,
    dual_transform_general,
    sigma_weight,
    worst_case_wsi,
    wsi,
)

q = ndtri  # standard normal conditional outcome for illustration
alpha = 0.4  # one minus the surrogacy score

print("=== The weight function sigma(u) at a few evaluation points ===")
us = np.array([0.1, 0.3, 0.5, 0.7, 0.9])
for label, spec in (
    ("independence", INDEPENDENCE),
    ("gaussian 0.6", CopulaSpec(CopulaFamily.GAUSSIAN, 0.6)),
    ("gaussian -0.6", CopulaSpec(CopulaFamily.GAUSSIAN, -0.6)),
    ("upper bound", FRECHET_UPPER),
):
    vals = ", ".join(f"{sigma_weight(spec, 1, u, alpha):5.2f}" for u in us)
    print(f"{label:14s} arm 1: [{vals}]")

print("\n=== Indices interpolate between the mean and the tail means ===")
mean = wsi(q, INDEPENDENCE, 1, alpha)
print(f"independence index (plain mean):     {mean:+.4f}")
for theta in (0.3, 0.6, 0.9):
    v = wsi(q, CopulaSpec(CopulaFamily.GAUSSIAN, theta), 1, alpha)
    print(f"gaussian theta={theta}: arm-1 index =     {v:+.4f}")
hi = worst_case_wsi(q, "upper", 1, 1 - alpha)
lo = worst_case_wsi(q, "lower", 1, 1 - alpha)
print(f"upper-bound index (tail mean):       {hi:+.4f}")
print(f"lower-bound index:                   {lo:+.4f}")
print(f"check: upper equals AVaR at {alpha}:     {avar(q, alpha):+.4f}")

print("\n=== Mixture identity: the two arms average back to the mean ===")
for theta in (0.3, 0.6, 0.9):
    spec = CopulaSpec(CopulaFamily.GAUSSIAN, theta)
    mix = (1 - alpha) * wsi(q, spec, 1, alpha) + alpha * wsi(q, spec, 0, alpha)
    print(f"theta={theta}: (1-a) mu1 + a mu0 = {mix:+.10f} (mean {mean:+.10f})")

print("\n=== Dual transforms recover the indices from outcome draws ===")
rng = np.random.default_rng(0)
y = rng.standard_normal(200_000)
cutoff = float(q(alpha))
dual_mean = np.mean(dual_transform("upper", y, cutoff, 1 - alpha))
print(f"tail dual Monte Carlo mean:    {dual_mean:+.4f} vs primal {avar(q, alpha):+.4f}")
spec = CopulaSpec(CopulaFamily.GAUSSIAN, 0.6)
h = dual_transform_general(spec, 1, y[:100_000], q, alpha)
print(f"general dual Monte Carlo mean: {np.mean(h):+.4f} vs primal "
      f"{wsi(q, spec, 1, alpha):+.4f}")
