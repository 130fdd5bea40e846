"""Command-line front end: verify, cost, traffic, bench and keygen-cache."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np

from . import cost, serialize
from .matmul import MatmulContext, ledger_formulas, matmul_diagonals, required_rotations
from .params import (
    SRAM_PRESETS,
    BenchmarkSpec,
    ParameterSet,
    get_set,
    known_sets,
    parse_size,
)
from .transform import SIGMA, MatrixDims, TransformKind, shape_type

BENCH_SCHEMA = 1
TOLERANCE = 1e-2
DEFAULT_SRAM = "43MB"
DEFAULT_CEILING_MIN = 10.0
# seconds per (coefficient x log N x extended limb x digit) of one rotation,
# calibrated on a laptop-class core; only used to gate encrypted runs
_ROT_COST = 1.2e-7


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


# ---------------------------------------------------------------------------
# helpers


def _seed(value: int | None) -> int:
    env = os.environ.get("HEMM_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise CliError(f"HEMM_SEED must be an integer, got {env!r}") from None
    return 0 if value is None else value


_USER_SETS: dict[str, ParameterSet] = {}


def _load_param_file(path: str | None):
    if not path:
        return
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read parameter file {path}: {exc}") from None
    for cfg in data if isinstance(data, list) else data.get("sets", [data]):
        ps = ParameterSet.from_config(cfg)
        _USER_SETS[ps.name] = ps


def _param_set(name: str, dims: MatrixDims | None = None) -> ParameterSet:
    if name in _USER_SETS:
        return _USER_SETS[name]
    try:
        return get_set(name, dims)
    except KeyError as exc:
        raise CliError(str(exc)) from None


def _dims(text: str) -> MatrixDims:
    try:
        return MatrixDims.parse(text)
    except ValueError as exc:
        raise CliError(str(exc)) from None


def _kind(text: str) -> TransformKind:
    name, _, k = text.partition("^")
    try:
        return TransformKind(name, int(k) if k else 0)
    except ValueError as exc:
        raise CliError(str(exc)) from None


def _budget(text: str) -> float:
    try:
        value = parse_size(text)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    if not value > 0:
        raise CliError("budget must be positive")
    return value


def estimate_runtime(ps: ParameterSet, dims: MatrixDims, trials: int) -> float:
    """Rough seconds for key generation plus ``trials`` encrypted products."""
    n = ps.N
    slots = n // 2
    ext = ps.L + 1 + len(ps.runtime_p_bits)
    per_rot = _ROT_COST * n * math.log2(n) * ext * (ps.beta + 1)
    if slots < 2 * 1024:
        # small rings: count the actual diagonals
        sets = matmul_diagonals(dims, slots)
        rots = sum(len(s) for s in sets.values())
        keys = len(required_rotations(dims, slots))
    else:
        rots = ledger_formulas(dims).formula["Rot"]
        keys = min(rots, slots)
    return per_rot * (keys + trials * rots)


def _emit(records, fmt: str, out=None):
    text = cost.to_csv(records) if fmt == "csv" else cost.to_json(records) + "\n"
    if fmt == "csv" and not records:
        text = ""
    elif fmt == "json" and isinstance(records, list) and not records:
        text = "[]\n"
    (out or sys.stdout).write(text)


def _scaled(report: dict, unit: str) -> dict:
    if unit == "B":
        return report
    div = {"KB": 1024, "MB": 1024**2, "GB": 1024**3}[unit]
    return {
        k: (v / div if isinstance(v, float) and (k.startswith(("B_", "M_")) and k != "B_coeff") else v)
        for k, v in report.items()
    }


# ---------------------------------------------------------------------------
# encrypted runs


def run_verify(dims: MatrixDims, ps: ParameterSet, trials: int, seed: int, mode: str) -> dict:
    dims.check_slots(ps.N // 2)
    chain = ps.chain()
    ctx = MatmulContext.create(chain, dims, ps.scale, seed)
    modes = ["baseline", "hoisted"] if mode == "both" else [mode]
    worst, ledger, levels = 0.0, None, None
    for t in range(trials):
        rng = np.random.default_rng([seed, 2, t])
        a = rng.uniform(-1, 1, (dims.m, dims.l))
        b = rng.uniform(-1, 1, (dims.l, dims.n))
        want = a @ b
        for m in modes:
            got, ledger, out = ctx.multiply(a, b, m)
            worst = max(worst, float(np.abs(got - want).max()))
            levels = {"input": chain.L, "output": out.level}
    return {
        "dims": dims.label,
        "set": ps.name,
        "N": ps.N,
        "shape": shape_type(dims),
        "mode": mode,
        "trials": trials,
        "seed": seed,
        "max_abs_error": worst,
        "tolerance": TOLERANCE,
        "pass": bool(worst <= TOLERANCE),
        "levels": levels,
        "ledger": ledger.as_dict() if ledger else None,
    }


def _gate(ps, dims, trials, ceiling_min):
    est = estimate_runtime(ps, dims, trials)
    if est > ceiling_min * 60:
        return f"estimated runtime {est / 60:.1f} min exceeds the {ceiling_min:g} min ceiling"
    return None


# ---------------------------------------------------------------------------
# subcommands


def cmd_verify(args) -> int:
    dims = _dims(args.dims)
    ps = _param_set(args.set, dims)
    try:
        dims.check_slots(ps.N // 2)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    reason = _gate(ps, dims, args.trials, args.max_minutes)
    if reason:
        raise CliError(reason)
    report = run_verify(dims, ps, args.trials, _seed(args.seed), args.mode)
    _emit(report, args.format)
    return 0 if report["pass"] else 1


def cmd_cost(args) -> int:
    ps = _param_set(args.set)
    report = _scaled(cost.mem_requirements(ps).as_dict(), args.unit)
    report["unit"] = args.unit
    if args.dims:
        report["ledger"] = ledger_formulas(_dims(args.dims)).as_dict()
    _emit(report, args.format)
    return 0


def cmd_traffic(args) -> int:
    ps = _param_set(args.set)
    dims = _dims(args.dims)
    budget = _budget(args.sram)
    schedules = cost.SCHEDULES if args.schedule == "both" else [args.schedule]
    try:
        reports = [
            cost.traffic_estimate(ps, dims, s, budget, _kind(args.kind), args.level) for s in schedules
        ]
    except ValueError as exc:
        raise CliError(str(exc)) from None
    _emit(reports if len(reports) > 1 else reports[0], args.format)
    return 0


def _load_bench(path: str) -> tuple[list[dict], float]:
    if path.startswith("builtin:"):
        name = path.split(":", 1)[1]
        try:
            text = resources.files("hemm").joinpath("data", name).read_text()
        except (FileNotFoundError, OSError):
            raise CliError(f"no bundled benchmark file {name!r}") from None
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise CliError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"malformed config {path}: {exc.msg} at line {exc.lineno}") from None
    if isinstance(data, list):
        return data, parse_size(DEFAULT_SRAM)
    if not isinstance(data, dict) or not isinstance(data.get("specs", None), list):
        raise CliError(f"malformed config {path}: expected a 'specs' list")
    if data.get("version", BENCH_SCHEMA) != BENCH_SCHEMA:
        raise CliError(f"unsupported benchmark schema version {data.get('version')}")
    for cfg in data.get("sets", []):
        ps = ParameterSet.from_config(cfg)
        _USER_SETS[ps.name] = ps
    return data["specs"], _budget(str(data.get("sram", DEFAULT_SRAM)))


def bench_row(spec: BenchmarkSpec, budget: float, ceiling_min: float, timing: bool) -> dict:
    ps = _param_set(spec.set_name, spec.dims)
    model = get_set(spec.set_name) if spec.set_name in known_sets() else ps
    mem = cost.mem_requirements(model)
    coarse = cost.traffic_estimate(model, spec.dims, cost.COARSE, budget, SIGMA)
    mohlt = cost.traffic_estimate(model, spec.dims, cost.MOHLT, budget, SIGMA)
    row = {
        "name": spec.name,
        "dims": spec.dims.label,
        "set": spec.set_name,
        "shape": spec.shape,
        "mode": spec.mode,
        "seed": spec.seed,
        "N": ps.N,
        "B_Ct": mem.B_Ct,
        "M_HE_MM": mem.M_HE_MM,
        "M_MO_HLT": mem.M_MO_HLT,
        "sram_budget_bytes": budget,
        "coarse_ct_offchip_bytes": coarse.ct_offchip_bytes,
        "mohlt_ct_offchip_bytes": mohlt.ct_offchip_bytes,
        "ledger": ledger_formulas(spec.dims).formula,
        "executed": False,
        "max_abs_error": None,
        "pass": None,
    }
    reason = "analysis-only" if spec.analysis_only else _gate(ps, spec.dims, 1, ceiling_min)
    if reason:
        row["skipped"] = reason
        return row
    start = time.perf_counter()
    report = run_verify(spec.dims, ps, 1, spec.seed, spec.mode)
    row.update(executed=True, max_abs_error=report["max_abs_error"])
    row["pass"] = report["pass"]
    row["measured"] = report["ledger"]["measured"]
    if timing:
        row["wall_seconds"] = round(time.perf_counter() - start, 3)
    return row


def cmd_bench(args) -> int:
    entries, budget = _load_bench(args.benchfile)
    if args.sram:
        budget = _budget(args.sram)
    env_seed = os.environ.get("HEMM_SEED")
    specs = []
    for cfg in entries:
        if not isinstance(cfg, dict):
            raise CliError(f"malformed benchmark entry {cfg!r}")
        try:
            spec = BenchmarkSpec.from_config(cfg)
            if env_seed is not None:
                spec = BenchmarkSpec(spec.name, spec.dims, spec.set_name, spec.mode, _seed(None), spec.analysis_only)
            _param_set(spec.set_name, spec.dims)
            spec.check()
        except (ValueError, KeyError) as exc:
            raise CliError(str(exc).strip('"')) from None
        specs.append(spec)

    def one(spec):
        return bench_row(spec, budget, args.max_minutes, args.timing)

    if args.jobs > 1:
        with ThreadPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(one, specs))
    else:
        rows = [one(s) for s in specs]
    if args.out:
        with open(args.out, "w") as fh:
            _emit(rows, args.format, fh)
    else:
        _emit(rows, args.format)
    failed = [r for r in rows if r["pass"] is False]
    return 1 if failed else 0


def cmd_keygen_cache(args) -> int:
    dims = _dims(args.dims)
    ps = _param_set(args.set, dims)
    try:
        dims.check_slots(ps.N // 2)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    seed = _seed(args.seed)
    ctx = MatmulContext.create(ps.chain(), dims, ps.scale, seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = {"mult": "mult.evk"}
    (out / "mult.evk").write_bytes(serialize.dumps(ctx.keys.mult))
    for z, key in sorted(ctx.keys.rotations.items()):
        name = f"rot_{z}.evk"
        (out / name).write_bytes(serialize.dumps(key))
        files[str(z)] = name
    manifest = {
        "set": ps.name,
        "N": ps.N,
        "dims": dims.label,
        "seed": seed,
        "moduli": list(ps.chain().values),
        "keys": files,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    _emit({"out": str(out), "keys": len(files), "set": ps.name, "N": ps.N}, args.format)
    return 0


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hemm", description=__doc__)
    parser.add_argument("--params", help="JSON file of user-defined parameter sets")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--format", choices=("json", "csv"), default="json")

    p = sub.add_parser("verify", help="encrypt, multiply and compare with plaintext")
    p.add_argument("--dims", required=True, help="m,l,n")
    p.add_argument("--set", default="set-a-like")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=("baseline", "hoisted", "both"), default="hoisted")
    p.add_argument("--max-minutes", type=float, default=DEFAULT_CEILING_MIN)
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("cost", help="on-chip memory requirements of a parameter set")
    p.add_argument("--set", required=True)
    p.add_argument("--dims", help="also print the operation-count formulas")
    p.add_argument("--unit", choices=("B", "KB", "MB", "GB"), default="B")
    common(p)
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("traffic", help="off-chip traffic of one HLT")
    p.add_argument("--set", required=True)
    p.add_argument("--dims", required=True)
    p.add_argument("--sram", default=DEFAULT_SRAM, help=f"budget, e.g. 43MB; presets: {', '.join(SRAM_PRESETS)}")
    p.add_argument("--schedule", choices=(*cost.SCHEDULES, "both"), default="both")
    p.add_argument("--kind", default="sigma", help="sigma, tau, epsilon^k or omega^k")
    p.add_argument("--level", type=int)
    common(p)
    p.set_defaults(func=cmd_traffic)

    p = sub.add_parser("bench", help="run a benchmark file (or builtin:desk.json)")
    p.add_argument("benchfile")
    p.add_argument("--sram", help="override the file's SRAM budget")
    p.add_argument("--timing", action="store_true", help="add wall-clock seconds per row")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    p.add_argument("--max-minutes", type=float, default=DEFAULT_CEILING_MIN)
    common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("keygen-cache", help="generate and store the evaluation keys of a product")
    p.add_argument("--dims", required=True)
    p.add_argument("--set", default="set-a-like")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_keygen_cache)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        _load_param_file(args.params)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError) as exc:
        msg = " ".join(str(exc).strip("'\"").split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
