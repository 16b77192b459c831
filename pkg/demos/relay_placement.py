"""
Where to put the relay
======================

Moves the relay along the source-destination axis (``phi`` is its
fractional position) with and without a barrier above the line. Both hops
lose power as the square of their length, so the end-to-end gain depends
on the product of the two distances and is smallest near the middle.
"""

import numpy as np

from swiet_relay import Geometry, SystemConfig, decompose, generate_channel, optimize_psr, search_alpha
from swiet_relay.tsr import TsrOptimizerSettings

cfg = SystemConfig.from_db(20.0, num_subcarriers=4, n_source=2, n_relay=2, n_dest=2)
fast = TsrOptimizerSettings(alpha_step=0.05)
phis = np.linspace(0.1, 0.9, 9)
trials = 4

# %%
for height in (0.0, 25.0):
    psr, tsr, product = [], [], []
    for phi in phis:
        geo = Geometry(barrier_height=height, phi=phi)
        r_p = r_t = 0.0
        for t in range(trials):
            eig = decompose(generate_channel(cfg, geo, t), cfg)
            r_p += optimize_psr(eig, cfg).rate
            r_t += search_alpha(eig, cfg, fast).rate
        psr.append(r_p / trials / 1e6)
        tsr.append(r_t / trials / 1e6)
        product.append(geo.d_sr * geo.d_rd)
    print(f"barrier height {height:g} m")
    for phi, p, t, d in zip(phis, psr, tsr, product):
        print(f"  phi={phi:.1f}  d_sr*d_rd={d:8.1f}  PSR {p:6.3f}  TSR {t:6.3f} Mbit/s")

# %%
# The distance product peaks where the rates bottom out.
geo_mid = Geometry(phi=0.5)
print("largest distance product at phi = 0.5:", geo_mid.d_sr * geo_mid.d_rd)
