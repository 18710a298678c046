"""Command-line entry point: ``aggdyn run|validate|list-components``."""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

from . import scenario as sc
from .integrator import METHODS

COMPONENT_HELP = {
    "rigid_body": "mass, inertia, connections",
    "flywheel": "rigid_body fields + wheel_inertia, spin_axis, initial_wheel_rate, motor_torque",
    "elastic_body": "rigid_body fields + modes[modal_mass, damping, stiffness, participation]",
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aggdyn", description="Simulate mechanical aggregates from scenario files.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="integrate a scenario and write a CSV trajectory")
    r.add_argument("scenario")
    r.add_argument("--out", help="output CSV path (default: ./<scenario name>.csv)")
    r.add_argument("--step", type=float)
    r.add_argument("--t-end", type=float)
    r.add_argument("--method", choices=METHODS)
    v = sub.add_parser("validate", help="run load-time checks only")
    v.add_argument("scenario")
    sub.add_parser("list-components", help="list component types and bundled scenarios")
    return p


def _resolve(name: str) -> str:
    # bare names refer to bundled scenarios
    if not name.endswith(".json") and "/" not in name:
        try:
            return str(sc.bundled_scenario_path(name))
        except FileNotFoundError:
            pass
    return name


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list-components":
        for name in sc.COMPONENT_TYPES:
            print(f"{name}: {COMPONENT_HELP[name]}")
        print("bundled scenarios: " + ", ".join(sc.bundled_scenarios()))
        return sc.EXIT_OK

    path = _resolve(args.scenario)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", sc.ScenarioWarning)
        try:
            doc = sc.load_scenario(path)
        except sc.ScenarioError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return sc.EXIT_VALIDATION
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)

    if args.command == "validate":
        print(f"{path}: ok ({len(doc.components)} components, {len(doc.connections)} connections)")
        return sc.EXIT_OK

    out = args.out or Path(path).stem + ".csv"
    report = sc.run(doc, out, step=args.step, t_end=args.t_end, method=args.method)
    stream = sys.stdout if report.exit_status == sc.EXIT_OK else sys.stderr
    print(report.summary(), file=stream)
    if report.exit_status == sc.EXIT_OK:
        print(f"wrote {out}")
    return report.exit_status


if __name__ == "__main__":
    sys.exit(main())
