"""Command line: ``tapsplit run|install|fire|fault|report|leakage``."""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from tapsplit.harness import report as report_mod
from tapsplit.harness.faults import MALICIOUS_SCRIPTS, TARGETS, inject_fault
from tapsplit.harness.leakage import leakage_of
from tapsplit.harness.runner import RunFailed, run_variant
from tapsplit.harness.workloads import builtin_workloads, load_workload
from tapsplit.platform import VARIANTS, AppletSpec, Deployment

STATE_FILE = "state.json"


def _print(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_run(args) -> int:
    try:
        rep = run_variant(args.variant, args.workload, args.cycles, args.seed, clock=args.clock, strict=not args.allow_aborts)
        status = 0
    except RunFailed as exc:
        rep, status = exc.report, 1
        print(f"run failed: {exc}", file=sys.stderr)
    if args.report:
        rep.save(args.report)
    d = rep.data
    print(
        f"{d['variant']} on {d['workload']}: {d['executed']}/{d['cycles']} executed, "
        f"platform {d['platform']['bytes']} B, inter-server during generate {d['phases']['generate']['inter_server_bytes']} B, "
        f"${d['dollars']['total']:.3g}"
    )
    return status


# The applet store holds the specs and App_b files; keys and tokens are
# re-derived from the store's seed, so `fire` rebuilds the same simulated
# deployment in a fresh process.


def _load_state(store: Path) -> dict:
    path = store / STATE_FILE
    if not path.exists():
        raise SystemExit(f"no applet store at {store}; run `install` first")
    return json.loads(path.read_text())


def _deployment(state: dict, store: Path) -> Deployment:
    gen_seed = int.from_bytes(hashlib.sha256(f"{state['seed']}/{state['generation']}".encode()).digest()[:8], "big")
    dep = Deployment(state["variant"], seed=gen_seed, store_dir=store)
    for spec in state["applets"].values():
        dep.install(AppletSpec.from_json(spec))
    return dep


def cmd_install(args) -> int:
    store = Path(args.store)
    spec_src = json.loads(Path(args.spec).read_text())
    spec = AppletSpec.from_json(spec_src.get("applet", spec_src))
    path = store / STATE_FILE
    state = json.loads(path.read_text()) if path.exists() else {"variant": args.variant, "seed": args.seed, "generation": 0, "applets": {}}
    if spec.applet_id in state["applets"]:
        print(f"applet {spec.applet_id} already installed", file=sys.stderr)
        return 1
    state["applets"][spec.applet_id] = spec.to_json()
    store.mkdir(parents=True, exist_ok=True)
    dep = _deployment(state, store)
    path.write_text(json.dumps(state, indent=2, sort_keys=True))
    app0, app1 = dep.app_sizes[spec.applet_id]
    print(f"installed {spec.applet_id} ({state['variant']}): App_0 {app0} B, App_1 {app1} B")
    return 0


def cmd_fire(args) -> int:
    store = Path(args.store)
    state = _load_state(store)
    if args.applet_id not in state["applets"]:
        print(f"unknown applet {args.applet_id}", file=sys.stderr)
        return 1
    state["generation"] += 1
    dep = _deployment(state, store)
    (store / STATE_FILE).write_text(json.dumps(state, indent=2, sort_keys=True))
    if args.value is not None:
        dep.weather.weather = args.value
    status = 0
    for _ in range(args.times):
        res = dep.run_cycle(args.applet_id)
        _print(res.to_json())
        status |= 0 if res.ok else 1
    return status


def cmd_fault(args) -> int:
    reports = inject_fault(args.kind, args.target, variant=args.variant, workload=args.workload, count=args.count, seed=args.seed)
    passed = sum(r.passed for r in reports)
    if args.verbose:
        for r in reports:
            _print(r.to_json())
    print(f"{args.kind}:{args.target or '-'}: {passed}/{len(reports)} rejected as expected with no effect")
    return 0 if passed == len(reports) else 1


def cmd_report(args) -> int:
    a, b = report_mod.load(args.a), report_mod.load(args.b)
    print(report_mod.format_diff(report_mod.diff(a, b), Path(args.a).stem, Path(args.b).stem))
    return 0


def cmd_leakage(args) -> int:
    _print(leakage_of(load_workload(args.workload).spec).to_json())
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tapsplit", description="Two-server private trigger-action platform simulator.")
    sub = p.add_subparsers(dest="command", required=True)
    variants = sorted(VARIANTS)

    r = sub.add_parser("run", help="run a variant on a workload and write a report")
    r.add_argument("--variant", choices=variants, required=True)
    r.add_argument("--workload", required=True, help=f"file or built-in name ({', '.join(builtin_workloads())})")
    r.add_argument("--cycles", type=int, default=1)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--report", help="write the JSON report here")
    r.add_argument("--clock", choices=("modeled", "measured"), default="modeled")
    r.add_argument("--allow-aborts", action="store_true")
    r.set_defaults(fn=cmd_run)

    i = sub.add_parser("install", help="install an applet spec into an applet store")
    i.add_argument("--spec", required=True, help="applet JSON or a workload file")
    i.add_argument("--store", default=".tapsplit")
    i.add_argument("--variant", choices=variants, default="w")
    i.add_argument("--seed", type=int, default=0)
    i.set_defaults(fn=cmd_install)

    f = sub.add_parser("fire", help="run an installed applet's cycle now")
    f.add_argument("applet_id")
    f.add_argument("--store", default=".tapsplit")
    f.add_argument("--value", help="weather value the mock trigger reports")
    f.add_argument("--times", type=int, default=1)
    f.set_defaults(fn=cmd_fire)

    fl = sub.add_parser("fault", help="inject faults and check they abort")
    fl.add_argument("--kind", choices=("tamper", "drop", "replay", "proof", "malicious"), required=True)
    fl.add_argument(
        "--target", default="",
        help=f"tamper/drop: {', '.join(TARGETS)}; proof: remove:b.i or forge:b.i; malicious: {', '.join(MALICIOUS_SCRIPTS)}",
    )
    fl.add_argument("--variant", choices=variants, default="w")
    fl.add_argument("--workload", default="string-sub")
    fl.add_argument("--count", type=int, default=1)
    fl.add_argument("--seed", type=int, default=0)
    fl.add_argument("-v", "--verbose", action="store_true")
    fl.set_defaults(fn=cmd_fault)

    rp = sub.add_parser("report", help="compare reports")
    rsub = rp.add_subparsers(dest="report_command", required=True)
    d = rsub.add_parser("diff", help="numeric fields that differ between two reports")
    d.add_argument("a")
    d.add_argument("b")
    d.set_defaults(fn=cmd_report)

    lk = sub.add_parser("leakage", help="print the leakage descriptor of a workload's applet")
    lk.add_argument("--workload", required=True)
    lk.set_defaults(fn=cmd_leakage)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
