"""Cellular load against the number of seeds: chain model and simulation.

Prints D(d) from the homogenised chain next to a Monte-Carlo estimate on a
heterogeneous Pareto contact graph, and marks the optimal seed count.

    python3 demos/load_curve.py
"""

from celloffload.analytic import ChainParams, InjectionStrategy, expected_load, gain, optimal_seed_count
from celloffload.mobility import SECONDS_PER_DAY, DurationDistribution, RateDistribution, sample_graph
from celloffload.sim import RoundConfig, empirical_load_curve

N, MU_DAY, SIGMA_DAY, DEADLINE = 100, 17.0, 0.04, 60.0

params = ChainParams(N, MU_DAY / SECONDS_PER_DAY, DEADLINE)
d_opt = optimal_seed_count(params)
graph = sample_graph(N, RateDistribution(MU_DAY / SECONDS_PER_DAY, SIGMA_DAY / SECONDS_PER_DAY), rng_seed=1)
d_values = [1, 5, 10, 15, 20, 25, 30, 40, 60, 80]
points = empirical_load_curve(graph, DurationDistribution(50.8), RoundConfig(deadline=DEADLINE, seed_count=1),
                              d_values, replications=200, master_seed=2)

closest = min(d_values, key=lambda d: abs(d - d_opt))
print(f"N={N}, mu={MU_DAY}/pair/day, T={DEADLINE:g} s, optimal d={d_opt}")
print(f"{'d':>4} {'chain D':>9} {'sim D':>9} {'+-':>6} {'gain G_d':>9}")
for p in points:
    analytic = expected_load(params, InjectionStrategy.prefix(p.d)).expected_load
    g = gain(params, p.d) if p.d < N - 1 else float("nan")
    mark = "  <- closest to the optimum" if p.d == closest else ""
    print(f"{p.d:>4} {analytic:>9.2f} {p.mean_load:>9.2f} {p.load_se:>6.2f} {g:>9.3f}{mark}")
