"""Extracted ODE right-hand sides against the closed-form coefficient equations.

The solver never writes the Riccati system out. It evaluates the optimized
generator on a handful of states and reads off the quadratic form. This
script puts that next to the textbook closed form (read with two obvious
transcription fixes, see the docstring of ``paper_coefficients_compare``)
and shows which pieces agree.

Run with ``python3 demos/04_closed_form_coefficients.py``.
"""

import numpy as np

from rsbgame import paper_coefficients_compare
from rsbgame.scenario import bundled_scenario

np.set_printoptions(precision=5, suppress=True)

for name in ("scalar_benchmark", "two_factor"):
    sc = bundled_scenario(name)
    rep = paper_coefficients_compare(sc.model, sc.spec.theta, seed=0)
    print("==", name, "theta =", rep["theta"])
    for block in ("dQ", "dq"):
        print("  %s extracted %s" % (block, rep[block]["extracted"].ravel()))
        print("  %s closed    %s   max |delta| = %.3g" % (block, rep[block]["closed_form"].ravel(), rep[block]["max_abs_delta"]))
    print("  dk extracted %.6f  closed %.6f" % (rep["dk"]["extracted"], rep["dk"]["closed_form"]))
    print("  trace term   %.6f  vs %.6f  (|delta| = %.1e)" % (
        rep["trace_term"]["extracted"], rep["trace_term"]["closed_form"], rep["trace_term"]["abs_delta"]))
    print()

# With no coupling between factors and drifts, both forms give zero for the
# quadratic and linear blocks at Q = q = 0.
sc = bundled_scenario("scalar_benchmark")
flat = sc.model.replace(A=np.zeros((1, 1)), beta=np.zeros(1))
rep = paper_coefficients_compare(flat, sc.spec.theta, Q=np.zeros((1, 1)), q=np.zeros(1))
print("uncoupled model: dQ delta %.1e, dq delta %.1e" % (rep["dQ"]["max_abs_delta"], rep["dq"]["max_abs_delta"]))
