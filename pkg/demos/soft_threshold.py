"""
The soft-threshold kernel
=========================

Every solver in the package reduces each coordinate to a one-dimensional
problem, minimise 0.5*A*x**2 - B*x + |x|, whose answer is the soft threshold
f(B; A).  Fields with |B| <= 1 are pushed to exactly zero.
"""

import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from l1bp import soft_threshold, soft_threshold_deriv

b = np.linspace(-4, 4, 801)
fig, axes = plt.subplots(1, 2, figsize=(8, 3))
for a in (0.5, 1.0, 2.0):
    axes[0].plot(b, soft_threshold(b, a), label=f"A={a}")
    axes[1].plot(b, soft_threshold_deriv(b, a), label=f"A={a}")
axes[0].set_title("f(B; A)")
axes[1].set_title("df/dB")
for ax in axes:
    ax.axvspan(-1, 1, color="0.9")  # dead zone
    ax.set_xlabel("B")
    ax.legend()
fig.tight_layout()
fig.savefig("soft_threshold.png", dpi=120)

# brute-force the scalar problem on a grid to see the kernel is its minimiser
xs = np.linspace(-5, 5, 200001)
for a, bb in [(1.0, 2.0), (2.0, -3.0), (0.7, 0.9)]:
    best = xs[np.argmin(0.5 * a * xs**2 - bb * xs + np.abs(xs))]
    print(f"A={a}, B={bb}: grid argmin {best:+.4f}, kernel {soft_threshold(bb, a):+.4f}")
