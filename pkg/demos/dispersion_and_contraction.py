"""
Two linear-regime checks: decay rates and two-run contraction.

A cosine of small amplitude under the linearised flow decays at
mu = -M k^2 (delta k^4 + a0 k^2 + lambda0) / (1 + eps M k^2).  The table
compares the measured rate with that formula using the discrete k^2.

Then two runs from nearby data with equal mean are compared in the H^-1 norm.
With a(u) = 1 + 0.2 u^2 the coefficient is convex and 1/a is uniformly
concave, and the distance stays below d(0) exp(rho t).
"""

import numpy as np

from chnl.diagnostics import Scenario, contraction_check, dispersion_check
from chnl.energetics import CoefficientSpec, PotentialSpec, check_uniqueness_regime
from chnl.grid import BC, Domain
from chnl.model import Mode, ModelParams, SeededNoise
from chnl.stepper import StepperConfig

dom = Domain((128,), (1.0,), BC.NOFLUX)
for delta, eps in ((0.0, 0.0), (0.0, 1.0), (1e-4, 0.0)):
    mode = Mode.SIXTH if delta else Mode.FOURTH
    p = ModelParams(mode, PotentialSpec.linear(1.0), CoefficientSpec.constant(1.0), delta=delta, epsilon=eps)
    print(f"delta = {delta:g}, eps = {eps:g}")
    for r in dispersion_check(p, dom, modes=(1, 2, 3)):
        print(f"  mode {r.mode}: mu {r.mu_numeric:12.4f}  predicted {r.mu_analytic:12.4f}  rel err {r.rel_err:.1e}")

a = CoefficientSpec.even_quadratic(1.0, 0.2)
print(f"\n{check_uniqueness_regime(a)}")
sc = Scenario(dom, ModelParams(Mode.FOURTH, PotentialSpec.logarithmic(3.0, 1e-3), a),
              StepperConfig(tau=1e-4, t_end=0.02), SeededNoise(0.0, 0.5, 5), smoothing=1e-6)
rep = contraction_check(sc, 1e-4)
for t, d in list(zip(rep.times, rep.distances))[::40]:
    print(f"  t = {t:.4f}  d = {d:.3e}")
print(f"rho_hat = {rep.rho_hat:.2f}, bounded: {rep.bounded}, superexponential: {rep.superexponential}")
print(f"d(t_end)/d(0) = {rep.distances[-1] / rep.distances[0]:.3f} (exp(rho_hat t_end) = "
      f"{np.exp(rep.rho_hat * rep.times[-1]):.3f})")
