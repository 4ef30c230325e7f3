"""Deterministic solver: two-level mesh refinement and its convergence rates.

The solver advances through m Taylor pieces per coarse interval and corrects
each coarse step with the exactly-integrated local field expansion plus a
midpoint average of the scaled residuals.  The error behaves like
h * hbar^(r+rho): doubling the fine count m buys a factor 2^(r+rho), and
doubling the coarse count n buys 2^(r+rho+1).
"""

import numpy as np

from rqode import SolveConfig, get_fixture, solve, sup_error

for name in ("sin_flow", "sin_flow_r1"):
    fx = get_fixture(name)
    order = fx.params.order
    print("\n=== %s (r=%d, rho=%g; order %g) ===" % (
        name, fx.params.r, fx.params.rho, order))

    print("doubling m at fixed n=4 (target ratio %g):" % 2 ** order)
    prev = None
    for m in (4, 8, 16, 32):
        res = solve(fx.problem, fx.params, SolveConfig(n=4, m=m, N=16))
        err = sup_error(res, fx.reference)
        ratio = "" if prev is None else "  ratio %.3f" % (prev / err)
        print("  m=%3d  sup error %.3e%s" % (m, err, ratio))
        prev = err

    print("doubling n at fixed m=4 (target ratio %g):" % 2 ** (order + 1))
    prev = None
    for n in (4, 8, 16, 32):
        res = solve(fx.problem, fx.params, SolveConfig(n=n, m=4, N=16))
        err = sup_error(res, fx.reference)
        ratio = "" if prev is None else "  ratio %.3f" % (prev / err)
        print("  n=%3d  sup error %.3e%s" % (n, err, ratio))
        prev = err

fx = get_fixture("exp_flow_r1")
res = solve(fx.problem, fx.params, SolveConfig(n=8, m=8, N=8))
print("\nexp fixture, n=m=N=8: |y_n - e^0.5| = %.3e  (cost %d calls)"
      % (abs(res.y_grid[-1][0] - np.exp(0.5)), res.ledger.total))
