"""HYPE on the streaming scenario, next to the fixed-d strategies.

The controller starts at 10% of the users and steers d until the signal
count s matches it.  Afterwards the mean load is compared with the
chain-optimal d and with the d=s point of the same trace.

    python3 demos/hype_stream.py
"""

import numpy as np

from celloffload.analytic import optimal_seed_count
from celloffload.baselines import find_balanced_seed_count, run_fixed_stream, run_hype_stream
from celloffload.control import ziegler_nichols
from celloffload.metrics import offload_fraction
from celloffload.scenarios import get_scenario

ROUNDS = 200
sc = get_scenario("streaming")
trace = sc.build_trace(ROUNDS)
cfg = sc.round_config()

hype = run_hype_stream(trace, cfg, ziegler_nichols(sc.n), ROUNDS)
d_opt = optimal_seed_count(sc.chain_params())
d_bal = find_balanced_seed_count(trace, cfg, ROUNDS)
fixed_opt = run_fixed_stream(trace, cfg, d_opt, ROUNDS)
fixed_bal = run_fixed_stream(trace, cfg, d_bal, ROUNDS)

print("d over the first 30 rounds:", hype.d_series[:30])
print(f"HYPE mean d after round 50: {np.mean(hype.d_series[50:]):.1f}")
print(f"{'strategy':<22} {'mean D':>8} {'offload':>8}")
for name, st in (("HYPE", hype), (f"chain optimum d={d_opt}", fixed_opt), (f"d=s point d={d_bal}", fixed_bal)):
    print(f"{name:<22} {st.mean_load():>8.2f} {offload_fraction(st.results, sc.n):>8.3f}")
