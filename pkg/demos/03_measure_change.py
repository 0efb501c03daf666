"""Three routes to the same number.

For constant controls the log excess return is Gaussian and J has a closed
form. The same quantity can be estimated by simulating wealth over
benchmark directly, or by simulating under the changed measure and
integrating the running cost instead. The density of that measure change
should have mean one.

Run with ``python3 demos/03_measure_change.py`` (about 20 s).
"""

import numpy as np

from rsbgame import (
    ControlPair,
    doleans_mean_check,
    estimate_I_changed_measure,
    estimate_J,
    gaussian_moments_constant_controls,
    simulate,
)
from rsbgame.oracle import gaussian_J
from rsbgame.scenario import bundled_scenario

sc = bundled_scenario("two_factor")
model, spec = sc.model, sc.spec
print("two factors, two assets, theta =", spec.theta)
print("r(t) breakpoints:", model.r.to_json())

c = ControlPair([0.6, 0.3], [0.05, -0.05, 0.1, 0.0])

mom = gaussian_moments_constant_controls(model, spec, c)
exact = gaussian_J(mom, spec.theta)
print("\nGaussian law of log F_T: mean %.5f, variance %.5f" % (mom.mean_F, mom.var_F))
print("closed form   J = mean - theta/4 var = %.5f" % exact)

bundle = simulate(model, spec, c, 50_000, 100, seed=11)
J = estimate_J(bundle, spec.theta)
print("physical      J = %.5f +- %.5f" % (J.mean, J.stderr))
print("  sample mean/var of log F_T: %.5f / %.5f" % (bundle.log_F.mean(), bundle.log_F.var()))

I = estimate_I_changed_measure(model, spec, c, 50_000, 100, seed=12)
print("changed       I = %.5f +- %.5f" % (I.mean, I.stderr))
print("|J - I| / joint se = %.2f" % (abs(J.mean - I.mean) / np.hypot(J.stderr, I.stderr)))

dens = doleans_mean_check(model, spec, c, 50_000, 100, seed=13)
print("\nmean of the measure-change density: %.5f +- %.5f" % (dens.mean, dens.stderr))
