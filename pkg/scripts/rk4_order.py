"""Observed convergence order of the fixed-step integrator.

Integrates an undamped mode (A=1, c=4) from q=1 to t=2 and compares with
cos(2t) for a sequence of halved steps.

    python scripts/rk4_order.py
"""

import math

from aggdyn.assembly import Aggregate, AggregateState
from aggdyn.components import ConnectionPoint, ElasticBody, ElasticBodyParams, ElasticModeParams, RigidBodyParams
from aggdyn.integrator import IntegrationSettings, integrate


def mode_error(h, t_end=2.0):
    body = ElasticBody(
        "mode",
        ElasticBodyParams(RigidBodyParams(1.0, [1, 1, 1], [ConnectionPoint("root")]), [ElasticModeParams(1.0, 0.0, 4.0)]),
    )
    traj = integrate(Aggregate([body]), AggregateState([body.make_state(extra=[1.0])]), IntegrationSettings(step=h, t_end=t_end))
    return abs(traj.final.state[0].q[7] - math.cos(2 * t_end))


def main():
    steps = [0.16, 0.08, 0.04, 0.02, 0.01]
    errors = [mode_error(h) for h in steps]
    print(f"{'h':>6} {'error':>12} {'ratio':>8} {'order':>6}")
    for k, (h, e) in enumerate(zip(steps, errors)):
        if k:
            r = errors[k - 1] / e
            print(f"{h:6.3f} {e:12.4e} {r:8.2f} {math.log2(r):6.2f}")
        else:
            print(f"{h:6.3f} {e:12.4e}")


if __name__ == "__main__":
    main()
