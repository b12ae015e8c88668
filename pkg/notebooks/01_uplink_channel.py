# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Drone uplink: LoS probability, path loss and rate
#
# A drone at height 100 m talks to a base station in the middle of a
# 10 km field. The LoS probability rises with elevation angle, the
# averaged path loss mixes the LoS and NLoS offsets, and the Shannon rate
# follows from the resulting gain.

# %%
import numpy as np

from soul.channel import ChannelParams, base_station, comm_time, link_budget, p_los

params = ChannelParams()
bs = base_station(10_000)

# %% [markdown]
# Rate against horizontal distance. Near the base station the link is
# almost surely LoS; far away it is mostly NLoS and the extra 19 dB shows.

# %%
for horiz in (10, 100, 500, 1000, 2000, 5000, 7000):
    lb = link_budget((bs[0] + horiz, bs[1], 100.0), bs, params, tx_power_w=3.0)
    print(f"{horiz:>5} m  elev {lb.elevation_deg:6.2f} deg  P_LoS {lb.p_los:.3f}  "
          f"PL {lb.pl_avg_db:6.2f} dB  rate {lb.rate_bps / 1e6:6.2f} Mbit/s")

# %% [markdown]
# The LoS curve itself.

# %%
angles = np.array([0, 5, 10, 20, 30, 45, 60, 90])
print(dict(zip(angles.tolist(), np.round(p_los(angles, params), 4).tolist())))

# %% [markdown]
# Upload time of a dense 10 MB model against its 2.5 MB pruned version at 1 km.

# %%
rate = link_budget((bs[0] + 1000, bs[1], 100.0), bs, params, 3.0).rate_bps
print(f"dense {comm_time(10e6, rate):.3f} s, pruned {comm_time(2.5e6, rate):.3f} s")
