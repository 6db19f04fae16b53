# %% [markdown]
# # Microwave transmission: cavity peak versus two-level dip
#
# At low bias the junction acts as a lossy single-mode cavity and transmits
# a Lorentzian peak. Near the critical current only two levels matter and the
# line shows a dip instead. Both are fitted back from noisy synthetic traces.

# %%
import numpy as np

from cbjj import (BosonScatterParams, FermionScatterParams, MeasuredTrace, fit_boson_spectrum,
                  fit_fermion_spectrum, sweep_spectrum)
from cbjj.scattering import quality_factor

cavity = BosonScatterParams.from_ghz(2.595, 0.004, 0.008, 0.0008)
atom = FermionScatterParams.from_ghz(2.42, 0.0021, 0.0062)
print(f"cavity Q = {quality_factor(cavity):.1f}")

# %%
rng = np.random.default_rng(1)
for model, lo, hi, fit in ((cavity, 2.55e9, 2.64e9, fit_boson_spectrum),
                           (atom, 2.38e9, 2.46e9, fit_fermion_spectrum)):
    spec = sweep_spectrum(model, lo, hi, 901)
    t = spec.transmission * (1 + 0.01 * rng.standard_normal(len(spec)))
    ph = spec.phase + 0.01 * rng.standard_normal(len(spec))
    kw = {"coupling_ratio": 2.0} if fit is fit_boson_spectrum else {}
    res = fit(MeasuredTrace(spec.frequency, t, "power", ph), **kw)
    print(type(model).__name__, "extreme transmission", f"{spec.transmission.max():.3f}"
          if fit is fit_boson_spectrum else f"{spec.transmission.min():.3f}")
    for k, v in res.params.items():
        print(f"   {k:>8s} = {v / 2 / np.pi / 1e9:.6f} GHz  +/- {res.uncertainties[k] / 2 / np.pi / 1e9:.1e}")
