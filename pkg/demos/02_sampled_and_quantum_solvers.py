"""The three solver modes side by side, and their error-versus-cost slopes.

Randomized mode runs the dense mesh m = n^2 but touches only a Monte Carlo
subsample of each step's residual family; quantum_sim mode keeps m = n and
pays the modeled query cost min(s, M/eps1) per estimate.  Both are
median-boosted.  The fitted slopes of log error against log deflated cost
recover the design exponents -(r+rho+1/3) and -(r+rho+1/2).
"""

from rqode import ExperimentPlan, SolveConfig, get_fixture, run_ladder, solve, sup_error

fx = get_fixture("sin_flow")

print("one n=8 solve per mode:")
for mode in ("deterministic", "randomized", "quantum_sim"):
    res = solve(fx.problem, fx.params, SolveConfig(n=8, mode=mode, seed=42))
    print("  %-13s m=%-3d sup error %.3e  ledger %s"
          % (mode, res.config.m, sup_error(res, fx.reference),
             {k: v for k, v in res.ledger.as_dict().items() if v}))

print("\nexponent ladders (30-40 trials per rung, seed 11):")
for mode, trials in (("randomized", 30), ("quantum_sim", 40)):
    plan = ExperimentPlan(fixture="sin_flow", mode=mode,
                          ladder=[2, 3, 4, 6, 8, 11, 16], trials=trials,
                          delta=0.25, seed=11)
    rep = run_ladder(plan)
    print("  %-13s slope %.4f (target %.4f +/- %.2f) raw %.4f pass=%s"
          % (mode, rep.slope, rep.target, rep.tolerance, rep.raw_slope,
             rep.passed))
    if rep.header:
        print("    note: %s" % rep.header)
