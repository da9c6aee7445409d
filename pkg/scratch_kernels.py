"""Scratch validation of kernel construction (not part of the package)."""
import time

import numpy as np

from crossdiff.kernels import (RieszSpec, MollifierSpec, build_mollified,
                               build_gaussian, GaussianSpec, kernel_value,
                               kernel_gradient, kernel_hessian, truncated_eval)

# --- mollifier mass ---
m = MollifierSpec(eta=0.1)
for d in (3, 4, 5):
    print(f"mollifier mass d={d}: {m.mass(d):.15f}")

# --- d=3 truncated (theta = 1) ---
spec = RieszSpec(dimension=3, exponent=1.0, coefficient=1.0)
t0 = time.time()
tab = build_mollified(spec, m)
print(f"build trunc d=3: {time.time()-t0:.2f}s quad_err={tab.quad_error:.2e}")
print("value at 0:", tab.val[0], "expected C/eta =", 1.0 / 0.1)
# harmonic outside the mollifier ball: exact equality for r > eta
for r in (0.15, 0.2, 0.5, 1.0, 5.0):
    v = tab.value(r)
    print(f"r={r}: B^eta={v:.12e} B={1/r:.12e} rel={(v - 1/r)/(1/r):.2e}")
print("d1(0):", tab.d1[0], "monotone:", bool(np.all(np.diff(tab.val) <= 1e-12)))

# FD consistency of d1 vs value and d2 vs d1 at various radii
def fd_check(tab, rs):
    for r in rs:
        # pick a test radius centered in a spline piece
        i = np.searchsorted(tab.r, r)
        mid = 0.5 * (tab.r[i - 1] + tab.r[i])
        h = (tab.r[i] - tab.r[i - 1]) / 5.0
        fd1 = (-tab.value(mid + 2 * h) + 8 * tab.value(mid + h)
               - 8 * tab.value(mid - h) + tab.value(mid - 2 * h)) / (12 * h)
        fd2 = (-tab.slope(mid + 2 * h) + 8 * tab.slope(mid + h)
               - 8 * tab.slope(mid - h) + tab.slope(mid - 2 * h)) / (12 * h)
        d1v = tab.slope(mid)
        d2v = tab.curvature(mid)
        print(f"  r~{mid:.4f}: d1 rel={(fd1-d1v)/abs(d1v):.2e}  d2 rel={(fd2-d2v)/abs(d2v):.2e}")

eta = 0.1
print("FD consistency (trunc):")
fd_check(tab, [eta / 2, eta, 2 * eta, 10 * eta])

# --- d=3 raw (theta = 0.5) ---
spec2 = RieszSpec(dimension=3, exponent=0.5, coefficient=1.0)
t0 = time.time()
tab2 = build_mollified(spec2, m)
print(f"build raw d=3: {time.time()-t0:.2f}s quad_err={tab2.quad_error:.2e}")
print("far-field rel err at 10*eta:", (tab2.value(1.0) - 1.0) / 1.0)
print("FD consistency (raw th=0.5):")
fd_check(tab2, [eta / 2, eta, 2 * eta, 10 * eta])
print("monotone:", bool(np.all(np.diff(tab2.val) <= 1e-12)))

# --- scaling laws ---
for theta in (1.0, 0.5):
    sp = RieszSpec(dimension=3, exponent=theta)
    sups = []
    etas = [0.4, 0.2, 0.1, 0.05]
    for e in etas:
        tb = build_mollified(sp, MollifierSpec(eta=e), n_abscissae=512)
        sups.append((tb.sup_value(), tb.sup_gradient(), tb.sup_hessian()))
    sups = np.array(sups)
    for c, name, expect in zip(range(3), ["B", "grad", "hess"],
                               [-theta, -(theta + 1), -(theta + 2)]):
        slope = np.polyfit(np.log(etas), np.log(sups[:, c]), 1)[0]
        print(f"theta={theta} sup|{name}| slope {slope:.4f} expect {expect}")

# --- generic d=4 cross-check ---
spec4 = RieszSpec(dimension=4, exponent=1.2, coefficient=0.7)
t0 = time.time()
tab4 = build_mollified(spec4, MollifierSpec(eta=0.2), n_abscissae=256)
print(f"build d=4: {time.time()-t0:.2f}s quad_err={tab4.quad_error:.2e}")
print("d=4 far rel:", (tab4.value(2.0) - 0.7 * 2.0 ** -1.2) / (0.7 * 2.0 ** -1.2))
print("FD consistency (d=4):")
fd_check(tab4, [0.1, 0.2, 0.4, 2.0])

# Monte Carlo cross-check of the d=4 convolution value at a couple of radii
rng = np.random.default_rng(0)
npts = 400000
y = rng.standard_normal((npts, 4))
y /= np.linalg.norm(y, axis=1, keepdims=True)
radial = rng.random(npts) ** (1 / 4) * 0.2  # uniform in the ball, then weight
y *= radial[:, None]
from crossdiff.kernels import _bump, sphere_area
norm4 = MollifierSpec(eta=0.2).normalization(4) / 0.2 ** 4
w_mc = _bump(np.linalg.norm(y, axis=1) / 0.2) * norm4
vol_ball = (np.pi ** 2 / 2) * 0.2 ** 4  # volume of 4-ball radius 0.2
for r in (0.05, 0.15, 0.3):
    x = np.array([r, 0, 0, 0.0])
    vals = 0.7 * np.maximum(np.linalg.norm(x[None, :] - y, axis=1), 1e-12) ** -1.2
    est = np.mean(w_mc * vals) * vol_ball
    se = np.std(w_mc * vals) * vol_ball / np.sqrt(npts)
    print(f"d=4 MC r={r}: table={tab4.value(r):.6f} mc={est:.6f} +- {3*se:.6f}")

# --- gaussian family ---
g = build_gaussian(GaussianSpec(dimension=1, amplitude=2.0, width=0.5))
print("gauss value(0):", g.value(0.0), "grad par:", kernel_gradient(g, np.array([0.3])))
H = kernel_hessian(tab, np.array([0.05, 0.03, 0.01]))
print("hessian symmetric:", np.max(np.abs(H - H.T)))
