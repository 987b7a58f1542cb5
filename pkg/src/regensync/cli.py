"""Command-line pipeline: gen, validate, pairs, build, solve, evaluate, report.

Exit codes: 0 success, 1 infeasible model or timetable violations, 2 usage
or input errors, 3 internal errors.  Errors print one line on stderr of the
form ``error: <kind>: <message>``.  A failing subcommand removes whatever
artifacts it had already written.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from . import __version__
from .energy import TABLE_HEADER, EnergyError, PowerParams, compare_reports, effective_consumption, table_row
from .generator import FIXTURES, GeneratorError, GenSpec, generate
from .instance import Instance, dumps, fixture_path, load_instance
from .mip import MipModel, ModelError, build_model, export_mps, model_stats
from .network import InstanceError, validate_network, validate_params
from .solver import Budget, SolverError, branch_and_bound, enumerate_oracle, extract_timetable
from .spstp import SyncPair, build_sync_pairs, pairs_table
from .timetable import Timetable, total_overlap, validate_timetable

log = logging.getLogger("regensync")

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3
KEEP = object()  # flag not given: keep the instance value


class UsageError(Exception):
    pass


class Violations(Exception):
    pass


class Artifacts:
    """Files written by one invocation; removed again if the run fails."""

    def __init__(self, outdir: Optional[Path]):
        self.outdir = outdir
        self.written: list[Path] = []

    def write(self, name: str, text: str) -> Path:
        if self.outdir is None:
            raise UsageError("an output directory (-o) is required")
        self.outdir.mkdir(parents=True, exist_ok=True)
        path = self.outdir / name
        path.write_text(text)
        self.written.append(path)
        return path

    def rollback(self) -> None:
        for path in self.written:
            path.unlink(missing_ok=True)


# --------------------------------------------------------------------------
# argument handling


def _big_m(text: str) -> Optional[float]:
    if text == "auto":
        return None
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a number, got {text!r}") from None
    if not (math.isfinite(value) and value > 0):
        raise argparse.ArgumentTypeError("big-M must be a positive number")
    return value


def _delta(text: str) -> Optional[float]:
    if text in ("none", "inf"):
        return None
    return float(text)


def _model_flags(sp: argparse.ArgumentParser) -> None:
    g = sp.add_argument_group("model overrides")
    g.add_argument("--r", type=float, help="pairing radius in seconds")
    g.add_argument("--epsilon", type=float, help="strictness margin in seconds")
    g.add_argument("--big-m", type=_big_m, default=KEEP, metavar="auto|VALUE",
                   help="computed per-pair M or one global value")
    g.add_argument("--delta", type=_delta, default=KEEP, metavar="SECONDS|none",
                   help="deviation bound around the initial timetable")


def _power_flags(sp: argparse.ArgumentParser) -> None:
    g = sp.add_argument_group("power model")
    g.add_argument("--accel-power", type=float, default=PowerParams.accel_power, help="kW")
    g.add_argument("--regen-power", type=float, default=PowerParams.regen_power, help="kW")
    g.add_argument("--efficiency", type=float, default=PowerParams.efficiency)
    g.add_argument("--base-energy", type=float, default=PowerParams.base_energy_per_trip, help="kWh per trip")


def _budget_flags(sp: argparse.ArgumentParser) -> None:
    g = sp.add_argument_group("solver")
    g.add_argument("--node-limit", type=int, default=Budget.node_limit)
    g.add_argument("--time-limit", type=float, default=Budget.time_limit, help="seconds")
    g.add_argument("--gap", type=float, default=0.0, help="relative optimality gap to stop at")
    g.add_argument("--threads", type=int, default=1)
    g.add_argument("--oracle", action="store_true", help="solve by enumerating every indicator pattern")
    g.add_argument("--backend", choices=("auto", "simplex", "highs"), default="auto", help="LP backend")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="regensync", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("gen", help="write a synthetic instance")
    sp.add_argument("-o", "--output", type=Path, required=True, help="instance JSON to write")
    sp.add_argument("--fixture", choices=sorted(FIXTURES), help="regenerate a bundled fixture")
    for f in dataclasses.fields(GenSpec):
        kind = _delta if f.name == "delta" else type(f.default)
        sp.add_argument("--" + f.name.replace("_", "-"), type=kind, default=KEEP)

    def instance_cmd(name: str, text: str, outdir: bool = True) -> argparse.ArgumentParser:
        sp = sub.add_parser(name, help=text)
        sp.add_argument("instance", help="instance JSON, or fixture:NAME for a bundled one")
        if outdir:
            sp.add_argument("-o", "--outdir", type=Path, help="directory for artifacts")
        _model_flags(sp)
        return sp

    sp = instance_cmd("validate", "check an instance and a timetable", outdir=False)
    sp.add_argument("--timetable", type=Path, help="timetable CSV (default: the initial timetable)")

    instance_cmd("pairs", "write the synchronization pair table")
    instance_cmd("build", "write the MPS model and model statistics")

    sp = instance_cmd("solve", "optimize the timetable")
    _budget_flags(sp)
    sp.add_argument("--seed", type=int, default=0, help="accepted for reproducibility; the solver is deterministic")

    sp = instance_cmd("evaluate", "overlap and energy of a timetable")
    sp.add_argument("--timetable", type=Path, help="timetable CSV (default: the initial timetable)")
    _power_flags(sp)

    sp = instance_cmd("report", "compare the initial and an optimized timetable")
    sp.add_argument("--timetable", type=Path, required=True, help="optimized timetable CSV")
    sp.add_argument("--stats", type=Path, help="stats.json from solve, for the CPU and node columns")
    _power_flags(sp)
    return parser


# --------------------------------------------------------------------------
# shared steps


def _load(args: argparse.Namespace) -> Instance:
    src = args.instance
    path = fixture_path(src.split(":", 1)[1]) if src.startswith("fixture:") else Path(src)
    if not path.is_file():
        raise UsageError(f"no such instance file {src}")
    inst = load_instance(path)
    changes: dict[str, Any] = {}
    for name in ("r", "epsilon"):
        if getattr(args, name, None) is not None:
            changes[name] = getattr(args, name)
    for name in ("big_m", "delta"):
        if getattr(args, name, KEEP) is not KEEP:
            changes[name] = getattr(args, name)
    if changes:
        inst.params = dataclasses.replace(inst.params, **changes)
    issues = validate_network(inst.network) + validate_params(inst.network, inst.params)
    if issues:
        raise InstanceError("; ".join(str(x) for x in issues[:5]), path.name)
    return inst


def _timetable(args: argparse.Namespace, inst: Instance) -> Timetable:
    if getattr(args, "timetable", None) is None:
        return inst.initial
    if not args.timetable.is_file():
        raise UsageError(f"no such timetable file {args.timetable}")
    try:
        return Timetable.from_csv(args.timetable.read_text())
    except (ValueError, KeyError) as exc:
        raise UsageError(f"bad timetable {args.timetable}: {exc}") from None


def _pairs(inst: Instance) -> list[SyncPair]:
    right, left = build_sync_pairs(inst.network, inst.initial, inst.params)
    return right + left


def _model(inst: Instance) -> tuple[list[SyncPair], MipModel]:
    pairs = _pairs(inst)
    return pairs, build_model(inst.network, inst.params, pairs, inst.initial)


def _power(args: argparse.Namespace) -> PowerParams:
    try:
        return PowerParams(args.accel_power, args.regen_power, args.efficiency, args.base_energy)
    except EnergyError as exc:
        raise UsageError(str(exc)) from None


def _json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# --------------------------------------------------------------------------
# subcommands


def cmd_gen(args: argparse.Namespace, out: Artifacts) -> int:
    if args.fixture:
        spec = FIXTURES[args.fixture]
    else:
        spec = GenSpec()
    given = {f.name: getattr(args, f.name) for f in dataclasses.fields(GenSpec) if getattr(args, f.name) is not KEEP}
    spec = dataclasses.replace(spec, **given)
    doc = generate(spec)
    out.outdir = args.output.parent
    out.write(args.output.name, dumps(doc))
    print(f"wrote {args.output} trains={len(doc['trains'])} platforms={len(doc['platforms'])}")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace, out: Artifacts) -> int:
    inst = _load(args)
    found = validate_timetable(_timetable(args, inst), inst.network, inst.params)
    for v in found:
        print(v)
    if found:
        raise Violations(f"{len(found)} timetable violation(s)")
    print("ok")
    return EXIT_OK


def cmd_pairs(args: argparse.Namespace, out: Artifacts) -> int:
    inst = _load(args)
    pairs = _pairs(inst)
    out.write("pairs.csv", pairs_table(pairs))
    right = sum(q.direction == "right" for q in pairs)
    print(f"pairs={len(pairs)} right={right} left={len(pairs) - right}")
    return EXIT_OK


def cmd_build(args: argparse.Namespace, out: Artifacts) -> int:
    inst = _load(args)
    _, model = _model(inst)
    out.write("model.mps", export_mps(model))
    stats = model_stats(model)
    out.write("model_stats.json", _json(stats))
    print(f"rows={stats['rows']} binaries={stats['binaries']} continuous={stats['continuous']}")
    return EXIT_OK


def cmd_solve(args: argparse.Namespace, out: Artifacts) -> int:
    inst = _load(args)
    if args.threads < 1 or args.node_limit < 0 or args.time_limit <= 0 or args.gap < 0:
        raise UsageError("budgets must be positive")
    pairs, model = _model(inst)
    if args.oracle:
        sol = enumerate_oracle(model, backend=args.backend)
    else:
        budget = Budget(args.node_limit, args.time_limit, args.gap, args.threads)
        sol = branch_and_bound(model, budget, backend=args.backend)
    if sol.status == "infeasible":
        raise Violations("model is infeasible")
    if sol.status == "no_solution":
        raise Violations("budget exhausted without a feasible solution")
    tt = extract_timetable(sol, inst.network)
    found = validate_timetable(tt, inst.network, inst.params)
    if found:
        raise SolverError(f"extracted timetable violates {found[0]}")
    summary = {
        "status": sol.status,
        "objective": round(sol.objective, 9),
        "initial_overlap": round(total_overlap(inst.initial, pairs), 9),
        "pairs": [
            {"pair": q.name, "direction": q.direction, "lambda": sol.lam[q.key], "sigma": round(sol.sigma[q.key], 9)}
            for q in model.pairs
        ],
    }
    stats = {**sol.stats.as_dict(), "rows": len(model.rows), "binaries": model.n_binaries,
             "continuous": len(model.variables) - model.n_binaries, "trains": len(inst.network.trains)}
    out.write("solution.json", _json(summary))
    out.write("timetable.csv", tt.to_csv())
    out.write("solver.log", "\n".join(sol.log) + "\n")
    out.write("stats.json", _json(stats))
    print(f"status={sol.status} objective={sol.objective:.6f} initial={summary['initial_overlap']:.6f} "
          f"nodes={sol.stats.nodes} gap={sol.stats.gap:.6g}")
    return EXIT_OK


def _energy(args: argparse.Namespace, inst: Instance, tt: Timetable, pairs: list[SyncPair]) -> dict[str, Any]:
    rep = effective_consumption(tt, pairs, None, _power(args), inst.params)
    return {
        "total_overlap_s": rep.total_overlap_s,
        "traction_kwh": rep.traction_kwh,
        "transferred_kwh": rep.transferred_kwh,
        "effective_kwh": rep.effective_kwh,
    }


def cmd_evaluate(args: argparse.Namespace, out: Artifacts) -> int:
    inst = _load(args)
    tt = _timetable(args, inst)
    found = validate_timetable(tt, inst.network, inst.params)
    result = _energy(args, inst, tt, _pairs(inst))
    result["violations"] = len(found)
    if args.outdir is not None:
        out.write("evaluation.json", _json(result))
    print(" ".join(f"{k}={v:.6f}" if isinstance(v, float) else f"{k}={v}" for k, v in sorted(result.items())))
    if found:
        raise Violations(f"{len(found)} timetable violation(s)")
    return EXIT_OK


def cmd_report(args: argparse.Namespace, out: Artifacts) -> int:
    inst = _load(args)
    tt = _timetable(args, inst)
    found = validate_timetable(tt, inst.network, inst.params)
    if found:
        raise Violations(f"optimized timetable has {len(found)} violation(s), first: {found[0]}")
    pairs, model = _model(inst)
    pp = _power(args)
    before = effective_consumption(inst.initial, pairs, None, pp, inst.params)
    after = effective_consumption(tt, pairs, None, pp, inst.params)
    cpu, nodes = 0.0, 0
    if args.stats is not None:
        stats = json.loads(args.stats.read_text())
        cpu, nodes = float(stats["wall_time"]), int(stats["nodes"])
    row = table_row(len(inst.network.trains), len(model.rows), model.n_binaries,
                    len(model.variables) - model.n_binaries, cpu, nodes, before, after)
    comparison = compare_reports(before, after)
    if args.outdir is not None:
        out.write("report.csv", TABLE_HEADER + "\n" + row + "\n")
        out.write("comparison.csv", comparison.table())
        detail = ["pair,direction,initial_sigma_s,final_sigma_s,initial_kwh,final_kwh"]
        for b, a in zip(before.pairs, after.pairs):
            detail.append(f"{b.pair},{b.direction},{b.sigma:.6f},{a.sigma:.6f},{b.transferred_kwh:.6f},{a.transferred_kwh:.6f}")
        out.write("pair_energy.csv", "\n".join(detail) + "\n")
    print(TABLE_HEADER)
    print(row)
    verdict = ">=" if after.total_overlap_s >= before.total_overlap_s - 1e-6 else "<"
    print(f"final overlap {after.total_overlap_s:.2f} {verdict} initial overlap {before.total_overlap_s:.2f}")
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen, "validate": cmd_validate, "pairs": cmd_pairs, "build": cmd_build,
    "solve": cmd_solve, "evaluate": cmd_evaluate, "report": cmd_report,
}


def _fail(kind: str, exc: BaseException) -> None:
    message = " ".join(str(exc).split()) or type(exc).__name__
    print(f"error: {kind}: {message}", file=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    out = Artifacts(getattr(args, "outdir", None))
    try:
        return COMMANDS[args.command](args, out)
    except Violations as exc:
        out.rollback()
        _fail("violations", exc)
        return EXIT_VIOLATION
    except (UsageError, InstanceError, GeneratorError, EnergyError, ModelError, OSError) as exc:
        out.rollback()
        _fail("usage", exc)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        out.rollback()
        log.debug("internal error", exc_info=True)
        _fail("internal", exc)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
