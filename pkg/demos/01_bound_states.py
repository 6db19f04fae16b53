# %% [markdown]
# # Bound states in a tilted washboard well
#
# A current-biased junction traps its phase in one well of the potential
# U = -E_J (s*delta + cos delta). The level ladder is nearly harmonic at zero
# bias and becomes strongly anharmonic as s approaches 1.

# %%
import numpy as np

from cbjj import JunctionParams, level_table, plasma_frequency, solve_bound_states
from cbjj.boundstates import anharmonicity_ratio, count_bound_states

p = JunctionParams(critical_current=0.979e-6, capacitance=11.18e-12)
print(f"zero-bias plasma frequency: {p.plasma_frequency_zero_bias / 2 / np.pi / 1e9:.3f} GHz")

# %% [markdown]
# ## Transition table
# Frequencies are in GHz. Blank entries mean the upper level is not bound.

# %%
table = level_table(p, [0.0, 0.45, 0.68, 0.945, 0.955, 0.964, 0.97])
for row in table.rows:
    ghz = ["   -   " if w is None else f"{w / 2 / np.pi / 1e9:7.4f}" for w in row.omega]
    print(f"s={row.bias_ratio:5.3f}  n_bound={row.n_bound:2d}  " + "  ".join(ghz))

# %% [markdown]
# ## Softening near the critical current
# The ground transition follows the small-oscillation frequency, which falls as
# (1 - s^2)^(1/4). The ratio w01/w12 measures the anharmonicity.

# %%
for s in (0.9, 0.95, 0.97, 0.98):
    sol = solve_bound_states(p, s, n_levels=3)
    w01 = (sol.energies[1] - sol.energies[0]) / p.constants.hbar
    print(f"s={s:.2f}  w01/w_p={w01 / plasma_frequency(p, s):.4f}  "
          f"w01/w12={anharmonicity_ratio(sol):.4f}  bound={count_bound_states(p, s)}")
