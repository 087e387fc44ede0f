"""Command-line front end.

Subcommands: validate, threshold, design-checks, optimize, scan, reproduce.
Exit codes: 0 success, 1 domain failure (constraint violation, infeasible
structure, benchmark miss), 2 usage or I/O error.  Optimization runs
require an explicit seed so no result is silently irreproducible.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

from . import __version__
from .check_design import CheckGroup, InfeasibleStructureError, design_checks
from .density_evolution import (
    DEFAULT_PARAMS,
    DEParams,
    shannon_limit,
    threshold,
)
from .ensemble import (
    Ensemble,
    EnsembleFormatError,
    VariableClass,
    code_rate,
    load_ensemble,
    parse_ensemble,
    save_ensemble,
    serialize_ensemble,
    validate,
)
from .landscape import ScanFormatError, parse_scan_spec, scan
from .optimizer_ar import ARConfig, ar_optimize, trace_csv
from .optimizer_struct import DifEConfig, dife_optimize, dife_trace_csv
from .structure import (
    StructureTemplate,
    TemplateFormatError,
    decode_structure,
    load_template,
)

USAGE_ERROR = 2
DOMAIN_ERROR = 1


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _load_ensemble(path: str) -> Ensemble:
    try:
        return load_ensemble(path)
    except FileNotFoundError:
        raise SystemExit(_fail(f"no such file: {path}", USAGE_ERROR))
    except EnsembleFormatError as exc:
        raise SystemExit(_fail(f"{path}: {exc}", USAGE_ERROR))


def _load_template(path: str) -> StructureTemplate:
    try:
        return load_template(path)
    except FileNotFoundError:
        raise SystemExit(_fail(f"no such file: {path}", USAGE_ERROR))
    except TemplateFormatError as exc:
        raise SystemExit(_fail(f"{path}: {exc}", USAGE_ERROR))


def _parse_config(path: str | None) -> dict[str, str]:
    if path is None:
        return {}
    out: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise SystemExit(_fail(f"no such file: {path}", USAGE_ERROR))
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SystemExit(_fail(f"{path}:{line_no}: expected key=value", USAGE_ERROR))
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def _de_params(cfg: dict[str, str]) -> DEParams:
    params = DEFAULT_PARAMS
    mapping = {
        "de_tol": float, "max_iter": int, "bisect_tol_bec": float,
        "bisect_tol_awgn": float, "stall_window": int, "stall_rel": float,
        "mean_sat": float, "awgn_approx": str,
    }
    updates = {k: conv(cfg[k]) for k, conv in mapping.items() if k in cfg}
    return replace(params, **updates) if updates else params


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------

def cmd_validate(args: argparse.Namespace) -> int:
    ens = _load_ensemble(args.ensemble)
    report = validate(ens, args.tol)
    rate = code_rate(ens)
    print(f"classes: {len(ens.var_classes)} variable, {len(ens.chk_classes)} check")
    print(f"rate: computed {rate:.9f}, declared {ens.design_rate:.9f}")
    if report.ok:
        print(f"all constraints satisfied within {args.tol:g}")
        return 0
    print(report)
    return DOMAIN_ERROR


# ---------------------------------------------------------------------------
# threshold
# ---------------------------------------------------------------------------

def cmd_threshold(args: argparse.Namespace) -> int:
    ens = _load_ensemble(args.ensemble)
    params = _de_params(_parse_config(args.config))
    try:
        limit = shannon_limit(args.channel, ens.design_rate)
    except ValueError as exc:
        return _fail(str(exc), DOMAIN_ERROR)
    result = threshold(ens, args.channel, params, keep_trace=args.trace is not None)
    print(f"channel: {args.channel}")
    print(f"threshold: {result.threshold:.6f}")
    print(f"shannon_limit: {limit:.6f}")
    print(f"gap: {abs(limit - result.threshold):.6f}")
    if result.degenerate:
        print("warning: undecodable even at the best probed channel", file=sys.stderr)
    if args.trace is not None:
        Path(args.trace).write_text(result.trace_csv(), encoding="utf-8")
    return 0


# ---------------------------------------------------------------------------
# design-checks
# ---------------------------------------------------------------------------

def _parse_groups(spec: str, m_e: int) -> tuple[CheckGroup, ...]:
    """Compact group syntax: 'residual:1,2 chain:3,4@4' ('all' covers 1..m_e)."""
    groups = []
    for token in spec.split():
        rule, _, rest = token.partition(":")
        anchor = None
        if "@" in rest:
            rest, _, anchor_s = rest.partition("@")
            anchor = int(anchor_s)
        edges = tuple(range(1, m_e + 1)) if rest == "all" else tuple(int(v) for v in rest.split(","))
        if rule == "residual":
            groups.append(CheckGroup(edges, "residual"))
        elif rule == "chain":
            if anchor is None:
                raise ValueError("chain group needs '@<socket type>'")
            groups.append(CheckGroup(edges, "one_socket_per_check", anchor))
        else:
            raise ValueError(f"unknown group rule {rule!r}")
    return tuple(groups)


def cmd_design_checks(args: argparse.Namespace) -> int:
    ens = _load_ensemble(args.ensemble)
    rate = args.rate if args.rate is not None else ens.design_rate
    try:
        groups = _parse_groups(args.groups, ens.m_e)
    except ValueError as exc:
        return _fail(str(exc), USAGE_ERROR)
    try:
        chk = design_checks(ens.var_classes, rate, groups, ens.m_e)
    except InfeasibleStructureError as exc:
        return _fail(str(exc), DOMAIN_ERROR)
    out = Ensemble(ens.m_e, ens.var_classes, chk, rate)
    text = serialize_ensemble(out)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        print(text, end="")
    report = validate(out, 1e-6)
    if not report.ok:
        return _fail(f"designed ensemble violates constraints: {report}", DOMAIN_ERROR)
    return 0


# ---------------------------------------------------------------------------
# optimize
# ---------------------------------------------------------------------------

def _ar_config(cfg: dict[str, str], seed: int) -> ARConfig:
    return ARConfig(
        n_pop=int(cfg.get("np", 100)),
        range_mult=float(cfg.get("rm", 1.25)),
        search_range0=float(cfg.get("sr0", 0.1)),
        delta=float(cfg.get("delta", 1e-5)),
        stall_generations=int(cfg.get("stall", 3)),
        seed=seed,
        max_generations=int(cfg.get("max_generations", 0)),
        bisect_tol=float(cfg["bisect_tol"]) if "bisect_tol" in cfg else None,
    )


def _dife_config(cfg: dict[str, str], seed: int) -> DifEConfig:
    return DifEConfig(
        population=int(cfg.get("pop", 10)),
        f=float(cfg.get("f", 0.5)),
        cr=float(cfg.get("cr", 0.8)),
        max_generations=int(cfg.get("outer_max_generations", 30)),
        stall_generations=int(cfg.get("outer_stall", 3)),
        seed=seed,
    )


def cmd_optimize(args: argparse.Namespace) -> int:
    template = _load_template(args.template)
    cfg = _parse_config(args.config)
    de_params = _de_params(cfg)
    ar_cfg = _ar_config(cfg, args.seed)

    if args.mode == "dd":
        if not template.fixed:
            return _fail("dd mode needs a template with fixed degrees", USAGE_ERROR)
        decoded = decode_structure(template, ())
        if decoded is None:
            return _fail("template structure is infeasible", DOMAIN_ERROR)
        try:
            res = ar_optimize(decoded, template, args.rate, args.channel, ar_cfg, de_params)
        except InfeasibleStructureError as exc:
            return _fail(str(exc), DOMAIN_ERROR)
        ens = _ensemble_from(decoded, res.best_coeffs, template, args.rate)
        trace_text = trace_csv(res.trace)
        result = res.best_threshold
    else:
        inner_seed = int(cfg.get("inner_seed", args.seed + 1))
        inner_cfg = _ar_config(
            {**cfg, "np": cfg.get("inner_np", "50"),
             "max_generations": cfg.get("inner_max_generations", "15")},
            inner_seed,
        )
        dife_cfg = _dife_config(cfg, args.seed)
        polish_np = int(cfg.get("polish_np", 100))
        polish_cfg = None
        if polish_np:
            polish_cfg = ARConfig(
                n_pop=polish_np,
                range_mult=inner_cfg.range_mult,
                search_range0=inner_cfg.search_range0,
                delta=float(cfg.get("polish_delta", 1e-5)),
                stall_generations=inner_cfg.stall_generations,
                seed=args.seed,
                max_generations=int(cfg.get("polish_max_generations", 0)),
            )
        try:
            res = dife_optimize(
                template, args.rate, args.channel, dife_cfg, inner_cfg, de_params,
                polish_cfg,
                polish_top_k=int(cfg.get("polish_top_k", 3)),
                polish_restarts=int(cfg.get("polish_restarts", 2)),
                inner_restarts=int(cfg.get("inner_restarts", 1)),
            )
        except InfeasibleStructureError as exc:
            return _fail(str(exc), DOMAIN_ERROR)
        ens = _ensemble_from(res.best_lambda, res.best_coeffs, template, args.rate)
        trace_text = dife_trace_csv(res.trace)
        result = res.best_threshold

    save_ensemble(ens, args.output)
    if args.trace:
        Path(args.trace).write_text(trace_text, encoding="utf-8")
    print(f"best threshold: {result.threshold:.6f}")
    print(f"ensemble written to {args.output}")
    return 0


def _ensemble_from(decoded, coeffs, template, rate) -> Ensemble:
    var_classes = tuple(
        VariableClass(b, d, c) for (_, b, d), c in zip(decoded, coeffs)
    )
    chk = design_checks(var_classes, rate, template.check_groups, template.m_e)
    return Ensemble(template.m_e, var_classes, chk, rate)


# ---------------------------------------------------------------------------
# scan
# ---------------------------------------------------------------------------

def cmd_scan(args: argparse.Namespace) -> int:
    try:
        text = Path(args.spec).read_text(encoding="utf-8")
    except FileNotFoundError:
        return _fail(f"no such file: {args.spec}", USAGE_ERROR)
    try:
        spec, template_path, rate, channel = parse_scan_spec(text)
    except ScanFormatError as exc:
        return _fail(f"{args.spec}: {exc}", USAGE_ERROR)
    template_file = Path(args.spec).parent / template_path
    template = _load_template(str(template_file))
    params = _de_params(_parse_config(args.config))
    grid = scan(template, spec, rate, channel, params)
    csv_text = grid.to_csv()
    if args.output:
        Path(args.output).write_text(csv_text, encoding="utf-8")
    else:
        print(csv_text, end="")
    return 0


# ---------------------------------------------------------------------------
# reproduce
# ---------------------------------------------------------------------------

def _benchmark_entries(table: str):
    data_dir = resources.files("metldpc").joinpath("data")
    spec = json.loads(data_dir.joinpath("benchmarks.json").read_text(encoding="utf-8"))
    if table not in spec:
        raise ValueError(f"unknown benchmark table {table!r}")
    return spec[table], data_dir


def cmd_reproduce(args: argparse.Namespace) -> int:
    try:
        entries, data_dir = _benchmark_entries(args.table)
    except ValueError as exc:
        return _fail(str(exc), USAGE_ERROR)
    params = _de_params(_parse_config(args.config))
    failures = 0
    for entry in entries:
        name = entry["name"]
        text = data_dir.joinpath("ensembles", entry["file"]).read_text(encoding="utf-8")
        ens = parse_ensemble(text)
        report = validate(ens, 1e-4)
        ok = report.ok
        line = [f"{name}: residual {report.max_residual:.2e}"]
        if not ok:
            failures += 1
            line.append("CONSTRAINTS-FAIL")
        for channel, key, band in (("bec", "bec", 5e-4), ("biawgn", "awgn", entry.get("awgn_band", 0.03))):
            published = entry.get(key)
            if published is None or channel not in args.channels:
                continue
            result = threshold(ens, channel, params)
            gap = abs(shannon_limit(channel, ens.design_rate) - result.threshold)
            diff = result.threshold - published
            good = abs(diff) <= band
            if not good:
                failures += 1
            line.append(
                f"{key} {result.threshold:.6f} (published {published:.6f}, "
                f"diff {diff:+.6f}, band {band:g}, gap {gap:.6f})"
                + ("" if good else " MISS")
            )
        print("  ".join(line))
    if failures:
        print(f"{failures} benchmark check(s) failed")
        return DOMAIN_ERROR
    print("all benchmark checks passed")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metldpc",
        description="Design and threshold analysis of multi-edge-type LDPC ensembles",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check an ensemble file's design constraints")
    p.add_argument("ensemble")
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("threshold", help="decoding threshold, Shannon limit and gap")
    p.add_argument("ensemble")
    p.add_argument("--channel", choices=["bec", "biawgn"], default="bec")
    p.add_argument("--config", help="key=value file overriding density-evolution controls")
    p.add_argument("--trace", help="write the bisection probe trace CSV here")
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("design-checks", help="complete a variable side with concentrated checks")
    p.add_argument("ensemble", help="ensemble file; its check lines are ignored")
    p.add_argument("--rate", type=float, help="design rate (defaults to the file's rate)")
    p.add_argument("--groups", default="residual:all",
                   help="check groups, e.g. 'residual:1,2 chain:3,4@4'")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_design_checks)

    p = sub.add_parser("optimize", help="optimize coefficients (dd) or structure+coefficients (joint)")
    p.add_argument("--mode", choices=["dd", "joint"], required=True)
    p.add_argument("--template", required=True)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--channel", choices=["bec", "biawgn"], default="bec")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--config", help="key=value file with optimizer settings")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--trace", help="write the per-generation trace CSV here")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("scan", help="grid-scan the threshold surface")
    p.add_argument("spec", help="scan spec file")
    p.add_argument("--config")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("reproduce", help="recompute the bundled benchmark tables")
    p.add_argument("--table", choices=["1", "2", "3"], required=True)
    p.add_argument("--channels", default="bec,biawgn",
                   type=lambda s: tuple(s.split(",")))
    p.add_argument("--config")
    p.set_defaults(func=cmd_reproduce)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors already
        return int(exc.code or 0)
    try:
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
