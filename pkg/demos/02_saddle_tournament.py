"""Unilateral deviations from the saddle, priced by Monte Carlo.

Every strategy below runs on the same Brownian paths, so the differences
in J are much sharper than the individual estimates. The investor should
never gain by leaving the saddle and the market should never lose.

Run with ``python3 demos/02_saddle_tournament.py`` (about 30 s).
"""

from rsbgame import saddle_tournament, solve_backward
from rsbgame.scenario import bundled_scenario

sc = bundled_scenario("scalar_benchmark")
coeffs = solve_backward(sc.model, sc.spec)
u0 = coeffs.value(0.0, sc.spec.x0)

res = saddle_tournament(sc.model, sc.spec, coeffs, magnitudes=(0.1, 0.5, 1.0, 2.0), n_paths=50_000, n_steps=100, seed=1)

print("u(0, x0)         = %.5f" % u0)
print("J(saddle)        = %.5f +- %.5f\n" % (res.saddle.mean, res.saddle.stderr))
print("%-12s %-9s %10s %12s %10s  %s" % ("deviation", "player", "J", "J - J(sad)", "stderr", "ordered"))
for row in res.rows:
    print("%-12s %-9s %10.5f %12.5f %10.5f  %s" % (row.label, row.player, row.estimate.mean, row.diff, row.stderr_diff, row.ordered))

# The investor's loss grows roughly quadratically in the deviation, as the
# strict concavity of the Hamiltonian in h suggests.
inv = [r for r in res.rows if r.player == "investor"]
print("\ninvestor loss ratios between successive deviations (quadratic growth predicts (s2/s1)^2):")
for a, b in zip(inv, inv[1:]):
    print("  %-6s -> %-6s : %6.2f   vs %6.2f" % (a.label, b.label, b.diff / a.diff, (b.magnitude / a.magnitude) ** 2))
