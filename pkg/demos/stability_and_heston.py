"""Stability regions of the stabilised schemes, then the Heston model.

The scan statistics take a minute at the default 2000 x 1000 resolution.
"""

import math
from pathlib import Path

import numpy as np

from rklpricer import harness
from rklpricer.config import heston_uniform_grid, load_config
from rklpricer.heston import HestonModel, domain_bounds, heston_rkl_price
from rklpricer.pde1d import Payoff, TimeAxis
from rklpricer.stability import table_row

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

# %%
# Average damping inside the region and area relative to unshifted RKL.
for s in (21, 11, 7):
    for scheme, eps in (("RKL", 0.0), ("RKL", 20.0), ("RKC", 23.0), ("RKC", 2.3), ("RKC", 0.01)):
        row = table_row(scheme, s, eps)
        print(f"s={s:2d} {scheme} eps={eps:<5g} damping {row['avg_damping']:.3f} area {100 * row['area_ratio']:5.1f}%")

# %%
# American put under Heston, strike 100, three months, Feller condition violated.
fang = load_config(CONFIGS / "heston_fang.json")
for m, n, l in ((75, 38, 120), (150, 75, 240), (300, 150, 480)):
    res = harness.price_problem(fang.with_overrides([f"grid.m={m}", f"grid.n={n}", f"time.steps={l}"]))
    print((m, n, l), " ".join(f"{p:.4f}" for p in res["prices"]), "stages", res["stages_used"])

# %%
# Time convergence on a fixed 100 x 50 grid against a 4096-step solution.
model, K, T, v0 = HestonModel(1.15, 0.0348, 0.39, -0.64, 0.04), 100.0, 0.25, 0.0348
x_max, v_max = domain_bounds(model, K, T, v0, n_std=3.0)
grid = heston_uniform_grid(x_max, v_max, 100, 50, anchor=K)
spots = np.array([80.0, 90.0, 100.0, 110.0, 120.0])


def prices(l):
    return heston_rkl_price(model, Payoff.put(K), grid, TimeAxis.uniform(l, T)).price(spots, v0)


ref = prices(4096)
levels = [4, 8, 16, 32, 64, 128, 256, 512, 1024]
err = [math.sqrt(np.mean((prices(l) - ref) ** 2)) for l in levels]
for l, e in zip(levels, err):
    print(f"{l:5d} {e:.3e}")
print("fitted order", -np.polyfit(np.log(levels), np.log(err), 1)[0])
