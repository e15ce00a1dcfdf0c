"""Controller reaction to a jump in the contact rate.

Contacts become about three times more frequent half way through the
stream; fewer seeds are then needed.  Nominal, ten times larger and ten
times smaller gains are run on the same trace.

    python3 demos/step_response.py
"""

from celloffload.control import check_stability, closed_loop_poles
from celloffload.experiments import step_response
from celloffload.scenarios import get_scenario

sc = get_scenario("streaming").with_(seed=1)
res = step_response(sc, mu_after=40.0, step_round=250, n_rounds=500)
print(f"d=s point before the step {res.target_before}, after {res.target_after}")
for f, name in ((1.0, "nominal"), (10.0, "gains x10"), (0.1, "gains /10")):
    d = res.d_series[f]
    t = res.settling[f]
    print(f"{name:<10} d at rounds 250..270: {d[250:271]}")
    print(f"{'':<10} settling: {'never' if t is None else f'{t} rounds'}")
    kp, ki = 0.2 * f, 0.4 / 3.4 * f
    st = check_stability(kp, ki, -2.0)
    print(f"{'':<10} linearised loop stable={st.stable}, poles {closed_loop_poles(kp, ki, -2.0).round(3)}")
