"""Endpoint solver: bisection on noisy estimates of the arrival-time defect.

For scalar fields bounded away from zero, z(b) is the root of
defect(y) = integral of 1/f from eta to y, minus (b - a).  Each midpoint
defect is estimated by a control-variate mean (Taylor part integrated
exactly, scaled residuals sampled), boosted by medians so the whole run
succeeds with probability 1 - delta, and bisection stops as soon as the
estimate is within twice its tolerance.
"""

from rqode import bisection_solve, get_fixture

fx = get_fixture("inv1p")
print("fixture %s: f(s) = 1/(1+s) on [0, 1.5]; true endpoint %.6f"
      % (fx.name, fx.y_star))

res = bisection_solve(fx.problem, fx.params, eps=1e-4, delta=0.1,
                      mode="quantum_sim", seed=7)
print("\nquantum_sim run (eps 1e-4): y_out=%.8f after %d/%d iterations, "
      "%d queries + %d evals" % (res.y_out, res.iters, res.max_iters,
                                 res.ledger.quantum_queries,
                                 res.ledger.f_evals))
print("trace (midpoint, estimate, chosen side):")
for (mid, est, side) in res.history[:6]:
    print("  %.6f  % .5f  %s" % (mid, est, side))
if len(res.history) > 6:
    print("  ... %d more" % (len(res.history) - 6))

print("\n50-trial contract check per mode (eps 1e-3, delta 0.1):")
for mode in ("randomized", "quantum_sim"):
    hits = costs = 0
    for t in range(50):
        r = bisection_solve(fx.problem, fx.params, 1e-3, 0.1, mode=mode,
                            seed=100 + t)
        hits += abs(r.y_out - fx.y_star) <= 1e-3
        costs += r.ledger.total
    print("  %-12s success %2d/50, mean cost %.0f" % (mode, hits, costs / 50))
