"""Mean backends and the median booster: cost laws and success amplification.

The Monte Carlo backend pays min(s, (2M/eps1)^2) accesses; the
quantum-cost-model stub pays min(s, M/eps1) queries and returns the true
mean plus calibrated noise.  A component-wise median of k runs lifts the
3/4 per-call success to any 1 - delta, with k chosen by exact binomial
tails rather than an asymptotic constant.
"""

import numpy as np

from rqode import ArrayFamily, mc_mean, median_boost, median_rep_count, \
    quantum_sim_mean
from rqode.rng import RngStream

rng_data = np.random.default_rng(0)
values = rng_data.uniform(-1.0, 1.0, size=200_000)
fam = ArrayFamily(values, bound=1.0)
truth = values.mean()
print("family of %d items in [-1, 1], true mean % .6f" % (fam.size, truth))

print("\ncost laws at shrinking tolerance:")
print("  eps1      mc accesses   quantum queries")
for eps1 in (0.1, 0.01, 0.001):
    mc = mc_mean(fam, eps1, RngStream(1))
    qt = quantum_sim_mean(fam, eps1, RngStream(1))
    print("  %-8g  %-12d  %d" % (eps1, mc.cost["f_evals"],
                                 qt.cost["quantum_queries"]))

print("\nmedian boosting a 3/4-success call:")
for delta in (0.1, 0.05, 0.01):
    k = median_rep_count(1, delta)
    rng = RngStream(77)
    eps1 = 0.01
    hits = sum(
        abs(median_boost(quantum_sim_mean, fam, eps1, k, rng).value[0]
            - truth) <= eps1
        for _ in range(400))
    print("  delta=%-5g k=%-3d empirical success %.3f (target >= %.2f)"
          % (delta, k, hits / 400, 1 - delta))
