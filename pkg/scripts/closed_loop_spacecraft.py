"""Closed-loop nadir pointing of the bundled flywheel spacecraft.

Runs ``spacecraft_controlled`` and prints the pointing error and the motor
torque every ``--every`` seconds. Optional gain overrides show how the
response changes.

    python scripts/closed_loop_spacecraft.py --t-end 500 --out closed_loop.csv
"""

import argparse
import dataclasses

from aggdyn.scenario import bundled_scenario_path, load_scenario, run


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--t-end", type=float, default=500.0)
    p.add_argument("--step", type=float)
    p.add_argument("--kp", type=float)
    p.add_argument("--kd", type=float)
    p.add_argument("--every", type=float, default=50.0, help="print interval in seconds")
    p.add_argument("--out", help="optional CSV path")
    args = p.parse_args()

    doc = load_scenario(bundled_scenario_path("spacecraft_controlled"))
    gains = {k: v for k, v in (("kp", args.kp), ("kd", args.kd)) if v is not None}
    if gains:
        doc = dataclasses.replace(doc, control=dataclasses.replace(doc.control, **gains))
    report = run(doc, args.out, t_end=args.t_end, step=args.step)
    print(report.summary())
    if report.exit_status:
        raise SystemExit(report.exit_status)

    print(f"\n{'t [s]':>8} {'error [rad]':>12} {'torque [N m]':>13} {'wheel rate [rad/s]':>19}")
    next_t = 0.0
    for s in report.trajectory:
        if s.time + 1e-9 >= next_t or s is report.trajectory.final:
            obs = s.observables
            wheel = s.state[0].qdot[6]
            print(f"{s.time:8.1f} {obs['local_vertical_error']:12.5f} {obs['motor_torque']:13.5f} {wheel:19.4f}")
            next_t += args.every


if __name__ == "__main__":
    main()
