# %% [markdown]
# # Switching-current statistics
#
# Ramping the bias lets thermal activation kick the phase over the barrier
# before I_c. The escape-rate integral gives the histogram directly; a
# Langevin run of the RCSJ equation gives the same thing from trajectories.

# %%
from cbjj import (JunctionParams, NoiseModel, SweepProtocol, escape_rate_distribution,
                  fit_switching_histogram, switching_histogram)

device = JunctionParams(0.979e-6, 93e-15, 290.0)
slow = SweepProtocol(peak_current=3e-6, ramp_rate=190e-6, n_trials=10000)
hist = escape_rate_distribution(device, slow, temperature=0.05)
print({k: round(v * 1e6, 4) for k, v in hist.summary().items() if k.endswith("_A")})

# %% [markdown]
# A short Langevin run on a fast ramp, compared with the rate model on the same ramp.

# %%
fast = SweepProtocol(peak_current=3e-6, ramp_rate=1.39, start_current=0.8e-6, n_trials=300)
lang = switching_histogram(device, fast, NoiseModel("johnson", 0.05, seed=7), bins=40)
ref = escape_rate_distribution(device, fast, 0.05)
print(f"mean switching current: langevin {lang.mean * 1e6:.4f} uA, rates {ref.mean * 1e6:.4f} uA")

# %% [markdown]
# Fitting the rate histogram recovers I_c and C.

# %%
res = fit_switching_histogram(hist, slow, 0.05)
print(f"I_c = {res.params['critical_current'] * 1e6:.4f} uA, C = {res.params['capacitance'] * 1e15:.1f} fF")
