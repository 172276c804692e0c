"""Command line front end.

Subcommands: ``models``, ``power``, ``size``, ``simulate``, ``surface``.
Every command prints a JSON run record by default (``--format json``), or
CSV / plain text. Exit codes: 0 success, 2 invalid input, 3 infeasible
request.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import asdict, dataclass
from typing import Any, Sequence

import numpy as np

from . import __version__
from .bounds import WorstCaseInput, exact_power, guaranteed_power
from .catalog import (
    CATALOG,
    DesignPoint,
    VarianceSpec,
    lookup,
    parse_assignments,
    plan_for,
    restrict_variance,
)
from .errors import AnovaPowerError, InfeasibleError
from .simulate import (
    SimConfig,
    empirical_power,
    generate_dataset,
    power_surface,
    write_dataset,
    write_surface_csv,
)
from .sizing import SizeRequest, min_size

SCHEMA_VERSION = 1
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3


@dataclass
class RunRecord:
    command: str
    request: dict
    result: Any
    tool_version: str = __version__
    schema_version: int = SCHEMA_VERSION
    seed: int | None = None
    wall_time: float | None = None

    def to_json(self) -> str:
        data = {k: v for k, v in asdict(self).items() if v is not None or k == "result"}
        return json.dumps(data, indent=2, default=_jsonable)

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        return cls(**json.loads(text))


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


# -- argument helpers ------------------------------------------------------------


def _assignments(text: str) -> dict[str, float]:
    try:
        return parse_assignments(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _grid(text: str) -> dict[str, list[int]]:
    out = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        key, _, span = item.partition("=")
        lo, sep, hi = span.partition("..")
        try:
            values = list(range(int(lo), int(hi) + 1)) if sep else [int(lo)]
        except ValueError:
            raise argparse.ArgumentTypeError(f"grid entries look like b=2..25, got {item!r}") from None
        if not values:
            raise argparse.ArgumentTypeError(f"empty grid range {item!r}")
        out[key.strip().lower()] = values
    if set(out) != {"b", "c"}:
        raise argparse.ArgumentTypeError("grid needs exactly the keys b and c")
    return out


def _variance(args) -> VarianceSpec:
    if args.components and args.sigma_y is not None:
        raise AnovaPowerError("give either --components or --sigma-y, not both")
    if args.components:
        return VarianceSpec(components=args.components)
    if args.sigma_y is not None:
        return VarianceSpec(sigma_y_sq=args.sigma_y**2)
    raise AnovaPowerError("variance information is required: --components or --sigma-y")


def _design(args, mode: str = "integer") -> DesignPoint:
    levels = dict(args.levels or {})
    return DesignPoint(levels, args.n, mode)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("json", "csv", "text"), default="json")
    p.add_argument("--timing", action="store_true", help="add wall_time to the JSON record")


def _add_model(p, levels_help="level counts, e.g. a=6,b=6,c=2"):
    p.add_argument("--model", required=True, help='model formula, e.g. "A > B~ > C~"')
    p.add_argument("--levels", type=_assignments, default={}, help=levels_help)
    p.add_argument("--alpha", type=float, default=0.05)


def _add_variance(p, sigma=True):
    p.add_argument("--delta", type=float, help="minimum difference between the largest and smallest A effect")
    if sigma:
        p.add_argument("--sigma-y", type=float, help="total standard deviation sigma_y")
    else:
        p.set_defaults(sigma_y=None)
    p.add_argument("--components", type=_assignments, help="variance components, e.g. sbA=1/18,sgAB=1/9,se=1/6")
    p.add_argument("--zero", default="", help="interaction components known to vanish, e.g. sag")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="anovapower", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("models", help="list the model catalog")
    p.add_argument("--random-only", action="store_true", help="only models with a random factor")
    p.add_argument("--formula", help="show the entry for one formula")
    _add_common(p)
    p.set_defaults(func=cmd_models)

    p = sub.add_parser("power", help="guaranteed or exact power of one design")
    _add_model(p)
    p.add_argument("--n", type=float, required=True, help="replicates per cell")
    p.add_argument("--mode", choices=("integer", "real"), default="integer")
    _add_variance(p)
    p.add_argument("--effects", help="explicit A effects, comma separated, row-major over (u, v, a)")
    p.add_argument("--worst-split", action="store_true", help="use the active-component sum instead of the given split")
    _add_common(p)
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("size", help="minimal design for a power requirement")
    _add_model(p, levels_help="level counts of fixed factors, e.g. a=6")
    p.add_argument("--power-requirement", type=float, required=True)
    p.add_argument("--mode", choices=("integer", "real"), default="integer")
    p.add_argument("--minima", type=_assignments, default={}, help="lower bounds of searched parameters, e.g. n=3")
    _add_variance(p)
    p.add_argument("--worst-split", action="store_true")
    p.add_argument("--verbose", action="store_true", help="include the search trace")
    _add_common(p)
    p.set_defaults(func=cmd_size)

    p = sub.add_parser("simulate", help="Monte Carlo rejection rate")
    _add_model(p)
    p.add_argument("--n", type=int, required=True)
    _add_variance(p, sigma=False)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--effects", help="explicit A effects, comma separated")
    g.add_argument("--extremal", action="store_true", help="least favorable effects for --delta (default)")
    p.add_argument("--replications", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", choices=("auto", "exact", "satterthwaite", "equivalent"), default="auto")
    p.add_argument("--check-equivalence", action="store_true", help="compare with the equivalent exact test")
    p.add_argument("--threads", type=int, help="worker threads (default from ANOVAPOWER_THREADS)")
    p.add_argument("--dump", help="write replication 0 to this CSV file")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("surface", help="power over a (b, c) grid as CSV")
    _add_model(p, levels_help="remaining level counts, e.g. a=6")
    p.add_argument("--grid", type=_grid, required=True, help="e.g. b=2..25,c=2..25")
    p.add_argument("--n", type=int, required=True)
    _add_variance(p, sigma=False)
    p.add_argument("--replications", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int)
    p.add_argument("--format", choices=("csv", "json", "text"), default="csv")
    p.add_argument("--timing", action="store_true")
    p.set_defaults(func=cmd_surface)
    return parser


# -- commands --------------------------------------------------------------------


def _plan_row(plan) -> dict:
    return {
        "row": plan.row,
        "formula": plan.formula,
        "exact": plan.exact,
        "pivot": plan.pivot,
        "df1": str(plan.df1),
        "df2": str(plan.df2) if plan.df2 else None,
        "R": str(plan.r) if plan.r else None,
        "T": plan.t_text() if plan.exact else None,
        "effects": plan.effect_kind,
    }


def cmd_models(args):
    if args.formula:
        plans = [lookup(args.formula)]
    else:
        plans = [p for p in CATALOG if not args.random_only or p.model.random]
    return [_plan_row(p) for p in plans], None


def _zero(args) -> tuple[str, ...]:
    return tuple(s.strip() for s in args.zero.split(",") if s.strip())


def cmd_power(args):
    variance = _variance(args)
    plan = plan_for(args.model, variance, _zero(args))
    if not lookup(args.model).exact:
        variance = restrict_variance(plan, variance)
    design = _design(args, args.mode)
    if args.effects:
        effects = [float(x) for x in args.effects.split(",")]
        result = exact_power(plan, design, effects, variance, args.alpha)
    else:
        if args.delta is None:
            raise AnovaPowerError("give --delta (worst case) or --effects (exact power)")
        split = "worst" if args.worst_split else "given"
        result = guaranteed_power(plan, design, WorstCaseInput(args.delta, variance), args.alpha, split)
    return {**result.to_dict(), "model": plan.formula}, None


def cmd_size(args):
    if args.delta is None:
        raise AnovaPowerError("--delta is required")
    req = SizeRequest(
        model=args.model,
        alpha=args.alpha,
        power=args.power_requirement,
        worst_case=WorstCaseInput(args.delta, _variance(args)),
        fixed_dims=args.levels,
        minima=args.minima,
        mode=args.mode,
        split="worst" if args.worst_split else "given",
        assume_zero=_zero(args),
    )
    result = min_size(req).to_dict()
    if not args.verbose:
        result.pop("search_trace")
    return result, None


def cmd_simulate(args):
    variance = _variance(args)
    design = DesignPoint(args.levels, args.n)
    common = dict(alpha=args.alpha, replications=args.replications, seed=args.seed)
    if args.effects:
        config = SimConfig(args.model, design, [float(x) for x in args.effects.split(",")], variance, **common)
    else:
        if args.delta is None:
            raise AnovaPowerError("give --delta for extremal effects, or --effects")
        config = SimConfig.extremal(args.model, design, args.delta, variance, **common)
    if args.dump:
        with open(args.dump, "w") as fh:
            write_dataset(config, generate_dataset(config, 0), fh)
    result = empirical_power(config, args.method, args.threads).to_dict()
    if args.check_equivalence:
        eq = empirical_power(config, "equivalent", args.threads)
        sat = empirical_power(config, "satterthwaite", args.threads) if args.method != "satterthwaite" else None
        joint = 2.5758293035489004 * np.sqrt(eq.analytic_power * (1 - eq.analytic_power) / config.replications)
        result["equivalence"] = {
            "equivalent_model": plan_for(config.model, variance).formula,
            "analytic_power": eq.analytic_power,
            "equivalent_rate": eq.rate,
            "satterthwaite_rate": sat.rate if sat else result["rate"],
            "ci99_halfwidth": float(joint),
            "within_ci": bool(abs(eq.rate - eq.analytic_power) <= joint),
        }
    return result, args.seed


def cmd_surface(args):
    variance = _variance(args)
    if args.delta is None:
        raise AnovaPowerError("--delta is required")
    rows = power_surface(
        args.model,
        args.grid["b"],
        args.grid["c"],
        args.n,
        args.alpha,
        args.delta,
        variance,
        args.levels,
        replications=args.replications,
        seed=args.seed,
        threads=args.threads,
    )
    stochastic = not (lookup(args.model).exact or _reducible(args.model, variance))
    return rows, args.seed if stochastic else None


def _reducible(model, variance) -> bool:
    try:
        plan_for(model, variance)
        return True
    except AnovaPowerError:
        return False


# -- output ----------------------------------------------------------------------


def _request(args) -> dict:
    skip = {"func", "format", "timing"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _flat(row: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in row.items():
        if isinstance(v, dict):
            out.update(_flat(v, f"{prefix}{k}."))
        elif isinstance(v, (list, tuple)):
            out[prefix + k] = json.dumps(v, default=_jsonable)
        else:
            out[prefix + k] = v
    return out


def _render(command: str, result, fmt: str) -> str:
    rows = result if isinstance(result, list) else [result]
    rows = [asdict(r) if hasattr(r, "__dataclass_fields__") else r for r in rows]
    if fmt == "csv":
        buf = io.StringIO()
        if command == "surface":
            write_surface_csv(result, buf)
            return buf.getvalue()
        flat = [_flat(r) for r in rows]
        keys = list(dict.fromkeys(k for r in flat for k in r))
        writer = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        writer.writeheader()
        writer.writerows(flat)
        return buf.getvalue()
    lines = []
    for r in rows:
        if command in ("models", "surface"):
            lines.append("  ".join(f"{k}={v}" for k, v in r.items()))
        else:
            lines.extend(f"{k}: {v}" for k, v in _flat(r).items())
    return "\n".join(lines) + "\n"


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        result, seed = args.func(args)
    except InfeasibleError as exc:
        print(f"anovapower: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (AnovaPowerError, ValueError, OSError) as exc:
        print(f"anovapower: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.format == "json":
        payload = [asdict(r) for r in result] if args.command == "surface" else result
        record = RunRecord(args.command, _request(args), payload, seed=seed)
        if args.timing:
            record.wall_time = time.perf_counter() - start
        sys.stdout.write(record.to_json() + "\n")
    else:
        sys.stdout.write(_render(args.command, result, args.format))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
