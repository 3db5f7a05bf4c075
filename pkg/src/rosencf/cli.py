"""Batch command line runner.

Every subcommand writes a result table (CSV or JSON) and a JSON manifest
next to it, and prints a short summary.  Exit codes: 0 success, 2 invalid
configuration, 3 numerical failure (precision cap, truncated expansions above
the tolerated fraction, or no usable statistic), 4 enumeration budget
exhausted.  ``rosencf rerun --manifest FILE`` repeats a recorded run.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass
from fractions import Fraction
from pathlib import Path

from . import __version__
from .cf import Family, alpha_family, expand, regular, rosen, theta_series
from .hecke import BudgetExceeded, compute_t0, count_solutions, min_abs_c
from .lab import (
    SEED_MIXER,
    ConstantsTarget,
    bjw_check,
    counting_experiment,
    default_t_grid,
    entropy_estimate,
    lenstra_breakpoint,
    legendre_scan,
    sample_point,
    sample_seed,
    seed_precision,
    theta_cdf,
)
from .moebius import ParabolicPoint
from .ring import K_MAX, PrecisionCapError, near

SCHEMA_VERSION = 1
OUTPUT_DIR_ENV = "ROSENCF_OUTPUT_DIR"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PRECISION = 3
EXIT_BUDGET = 4

class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    k: int | None
    family: str
    alpha: str | None
    samples: int
    iters: int
    seed: int
    precision_bits: int | None
    x: str | None
    t_grid: str | None
    c_grid: str | None
    c_factors: str
    n_grid: str | None
    q_bound: float
    seed_mode: str
    probe_bound: int
    format: str
    output: str | None
    workers: int

    def make_family(self) -> Family:
        if self.family == "regular":
            return regular()
        if self.family == "alpha":
            return alpha_family(Fraction(self.alpha or "1/2"))
        if self.k is None:
            raise ConfigError("--k is required for the rosen family")
        return rosen(self.k)

    def echo(self) -> dict:
        """Config as stored in the manifest; workers is left out since it never changes the numbers."""
        d = asdict(self)
        d.pop("workers")
        return d


# ---------------------------------------------------------------------------
# parsing


def parse_grid(spec: str) -> list[Fraction]:
    """'a,b,c' or 'start:stop:step' (stop inclusive), parsed as exact decimals."""
    spec = spec.strip()
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ConfigError(f"bad range {spec!r}")
        lo, hi, step = (Fraction(p) for p in parts)
        if step <= 0 or hi < lo:
            raise ConfigError(f"bad range {spec!r}")
        n = int((hi - lo) / step)
        return [lo + i * step for i in range(n + 1)]
    try:
        vals = [Fraction(p) for p in spec.split(",") if p.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad grid {spec!r}") from exc
    if not vals:
        raise ConfigError("empty grid")
    return vals


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="rosencf", description="Rosen continued fraction experiments.",
        epilog="rosencf rerun --manifest FILE [--output PATH] [--workers N] repeats a recorded run.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, samples, iters, family="rosen"):
        p.add_argument("--k", type=int, default=None, help="Hecke index, 3..%d" % K_MAX)
        p.add_argument("--family", choices=("rosen", "regular", "alpha"), default=family)
        p.add_argument("--alpha", default=None, help="alpha for the alpha family, e.g. 1/2")
        p.add_argument("--samples", type=int, default=samples)
        p.add_argument("--iters", type=int, default=iters)
        p.add_argument("--seed", type=int, default=1, help="64-bit master seed")
        p.add_argument("--precision-bits", type=int, default=None)
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--output", default=None, help=f"result file; default under ${OUTPUT_DIR_ENV} or .")
        p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("expand", help="digits, convergents and Theta_n of one point")
    common(p, 1, 10)
    p.add_argument("--x", default=None, help="decimal or fraction; sampled from --seed when absent")

    p = sub.add_parser("entropy", help="(2/n) ln q_n averaged over seeds")
    common(p, 200, 20000)

    p = sub.add_parser("lenstra", help="pooled Theta distribution and its linear breakpoint")
    common(p, 1000, 1000)
    p.add_argument("--t-grid", default=None, help="default 0.005:1:0.005")

    p = sub.add_parser("bjw", help="regular continued fraction Theta distribution against F(t)")
    common(p, 1000, 1000, family="regular")
    p.add_argument("--t-grid", default=None, help="default 0.005:1:0.005")

    p = sub.add_parser("legendre", help="search for non-convergent solutions of |x - p/q| < c/q^2")
    common(p, 1000, 0)
    p.add_argument("--c-grid", default=None, help="absolute c values")
    p.add_argument("--c-factors", default="0.9,1.15", help="multiples of the Lenstra target, used without --c-grid")
    p.add_argument("--q-bound", type=float, default=200.0)
    p.add_argument("--seed-mode", choices=("uniform", "large_digit"), default="uniform")

    p = sub.add_parser("count", help="number of g(oo) with |x - g(oo)| < t/c^2, |c| <= N")
    common(p, 50, 0)
    p.add_argument("--x", default=None, help="single point; sampled from --seed when absent")
    p.add_argument("--t-grid", default="0.1,0.25,0.4")
    p.add_argument("--n-grid", default="10,100,1000,10000")

    p = sub.add_parser("t0", help="half the minimal |c| over non-translations")
    common(p, 0, 0)
    p.add_argument("--probe-bound", type=int, default=4)
    return ap


_COMMON_FIELDS = ("k", "family", "alpha", "samples", "iters", "seed", "precision_bits", "format", "output")
_COMMAND_FIELDS = {
    "expand": ("x",),
    "entropy": (),
    "lenstra": ("t_grid",),
    "bjw": ("t_grid",),
    "legendre": ("c_grid", "c_factors", "q_bound", "seed_mode"),
    "count": ("x", "t_grid", "n_grid"),
    "t0": ("probe_bound",),
}


def config_to_argv(config: dict, output: str | None = None, workers: int = 1) -> list[str]:
    """Command line that reproduces a manifest's config echo."""
    command = config["command"]
    if command not in _COMMAND_FIELDS:
        raise ValueError(f"unknown command {command!r}")
    argv = [command]
    for name in _COMMON_FIELDS + _COMMAND_FIELDS[command]:
        val = output if name == "output" and output is not None else config.get(name)
        if val is not None:
            argv += ["--" + name.replace("_", "-"), str(val)]
    return argv + ["--workers", str(workers)]


def make_config(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(
        command=ns.command, k=ns.k, family=ns.family, alpha=ns.alpha, samples=ns.samples, iters=ns.iters,
        seed=ns.seed, precision_bits=ns.precision_bits, x=getattr(ns, "x", None),
        t_grid=getattr(ns, "t_grid", None), c_grid=getattr(ns, "c_grid", None),
        c_factors=getattr(ns, "c_factors", "0.9,1.15"), n_grid=getattr(ns, "n_grid", None),
        q_bound=getattr(ns, "q_bound", 200.0), seed_mode=getattr(ns, "seed_mode", "uniform"),
        probe_bound=getattr(ns, "probe_bound", 4), format=ns.format, output=ns.output, workers=ns.workers)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    if cfg.k is not None and not 3 <= cfg.k <= K_MAX:
        raise ConfigError(f"k must lie in 3..{K_MAX}")
    if not 0 <= cfg.seed < 2 ** 64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    if cfg.precision_bits is not None and cfg.precision_bits < 53:
        raise ConfigError("precision_bits must be >= 53")
    if cfg.command in ("entropy", "lenstra", "bjw", "legendre") and cfg.samples < 1:
        raise ConfigError("samples must be >= 1")
    if cfg.command in ("expand", "entropy", "lenstra", "bjw") and cfg.iters < 1:
        raise ConfigError("iters must be >= 1")
    if cfg.command == "count" and cfg.x is None and cfg.samples < 1:
        raise ConfigError("samples must be >= 1")
    if cfg.command in ("legendre", "count", "t0") and cfg.k is None:
        raise ConfigError("--k is required")
    if cfg.command in ("legendre", "count", "t0") and cfg.family != "rosen":
        raise ConfigError(f"{cfg.command} works with the rosen family only")
    if cfg.command == "bjw" and cfg.family != "regular":
        raise ConfigError("bjw uses the regular continued fraction")
    if cfg.command == "legendre" and cfg.q_bound < 1:
        raise ConfigError("q_bound must be >= 1")
    if cfg.command == "t0" and cfg.probe_bound < 1:
        raise ConfigError("probe_bound must be >= 1")
    if cfg.family == "alpha":
        a = Fraction(cfg.alpha or "1/2")
        if not 0 < a <= 1:
            raise ConfigError("alpha must lie in (0, 1]")
    for g in (cfg.t_grid, cfg.c_grid, cfg.n_grid):
        if g is not None:
            vals = parse_grid(g)
            if any(v <= 0 for v in vals):
                raise ConfigError("grid values must be positive")
    if cfg.n_grid is not None and any(v.denominator != 1 for v in parse_grid(cfg.n_grid)):
        raise ConfigError("N grid must be integers")
    if cfg.n_grid is not None and any(v < 2 for v in parse_grid(cfg.n_grid)):
        raise ConfigError("N grid values must be >= 2 (ln N is a divisor)")


# ---------------------------------------------------------------------------
# commands; each returns (header, rows, summary, failures, valid)


def _targets(fam: Family | None):
    tg = ConstantsTarget.for_family(fam) if fam is not None else None
    return tg.as_dict() if tg is not None else None


def _point_str(p, q) -> str:
    return str(ParabolicPoint.from_pair(p, q))


def _parse_x(cfg: RunConfig, fam: Family):
    try:
        xq = Fraction(cfg.x)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad x {cfg.x!r}") from exc
    if cfg.precision_bits is None:
        return xq
    return near(cfg.precision_bits).div(xq.numerator, xq.denominator)


def cmd_expand(cfg: RunConfig):
    fam = cfg.make_family()
    if cfg.x is not None:
        x = _parse_x(cfg, fam)
    else:
        prec = cfg.precision_bits or seed_precision(cfg.iters)
        x = sample_point(fam, prec, sample_seed(cfg.seed, 0))
    try:
        e = expand(x, fam, cfg.iters, precision_bits=cfg.precision_bits if cfg.x is None else None)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    thetas = theta_series(e).thetas if e.digits else []
    conv = e.convergents
    rows = []
    for n, (eps, b) in enumerate(e.digits, start=1):
        p, q = conv[n]
        rows.append([n, eps, b, str(p), str(q), thetas[n - 1] if n - 1 < len(thetas) else math.nan])
    summary = {
        "digits": e.digit_string(),
        "convergents": ", ".join(_point_str(p, q) for p, q in conv[1:]),
        "terminated": e.terminated,
        "truncated": e.truncated,
        "x": cfg.x if cfg.x is not None else "%d/%d" % tuple(int(v) for v in x.as_integer_ratio()),
    }
    print(f"digits: {summary['digits']}")
    print(f"convergents: {summary['convergents']}")
    if e.terminated:
        print("terminated")
    failures = {"truncated": int(e.truncated)}
    return (["n", "eps", "b", "p", "q", "theta"], rows, summary, failures, not e.truncated, _targets(fam))


def cmd_entropy(cfg: RunConfig):
    fam = cfg.make_family()
    est = entropy_estimate(fam, cfg.samples, cfg.iters, cfg.seed, cfg.workers)
    tg = ConstantsTarget.for_family(fam)
    target = tg.entropy_target if tg else math.nan
    rel = (est.h_hat - target) / target if tg else math.nan
    rows = [[fam.label, cfg.samples, cfg.iters, est.h_hat, est.stderr, target, rel, est.failures]]
    summary = {"h_hat": est.h_hat, "stderr": est.stderr, "target": target, "relative_error": rel}
    print(f"h_hat = {est.h_hat!r} +- {est.stderr!r} (target {target!r}, relative error {rel:+.4%})")
    return (["family", "samples", "iters", "h_hat", "stderr", "target", "relative_error", "failures"],
            rows, summary, {"truncated_samples": est.failures}, est.valid, _targets(fam))


def _t_grid(cfg: RunConfig):
    if cfg.t_grid is None:
        return default_t_grid()
    return [float(t) for t in parse_grid(cfg.t_grid)]


def cmd_lenstra(cfg: RunConfig):
    fam = cfg.make_family()
    cdf = theta_cdf(fam, cfg.samples, cfg.iters, cfg.seed, _t_grid(cfg), cfg.workers)
    tg = ConstantsTarget.for_family(fam)
    summary = {"pooled_values": cdf.sample_count,
               "lenstra_target": tg.lenstra_target if tg else None,
               "slope_target": tg.cdf_slope if tg else None}
    try:
        bp = lenstra_breakpoint(cdf)
    except ValueError as exc:
        # too little data (or no linear stretch): keep the CDF, mark the run invalid
        print(f"no breakpoint: {exc}", file=sys.stderr)
        rows = [[float(t), float(m), math.nan] for t, m in zip(cdf.t_grid, cdf.mass)]
        summary["error"] = str(exc)
        return (["t", "empirical_cdf", "linear_fit"], rows, summary,
                {"truncated_samples": cdf.failures, "breakpoint": 1}, False, _targets(fam))
    rows = [[float(t), float(m), bp.slope * float(t)] for t, m in zip(cdf.t_grid, cdf.mass)]
    summary.update({"t_star": bp.t_star, "slope": bp.slope, "residual": bp.residual, "method": bp.method})
    print(f"breakpoint t* = {bp.t_star!r}, slope {bp.slope!r}"
          + (f" (targets {tg.lenstra_target!r}, {tg.cdf_slope!r})" if tg else ""))
    return (["t", "empirical_cdf", "linear_fit"], rows, summary, {"truncated_samples": cdf.failures},
            cdf.valid, _targets(fam))


def cmd_bjw(cfg: RunConfig):
    table = bjw_check(cfg.samples, cfg.iters, cfg.seed, _t_grid(cfg), cfg.workers)
    rows = [[t, e, f, e - f] for t, e, f in table.rows]
    summary = {"max_deviation": table.max_deviation, "pooled_values": table.cdf.sample_count}
    print(f"max deviation from F(t): {table.max_deviation!r}")
    return (["t", "empirical_cdf", "F", "deviation"], rows, summary, {"truncated_samples": table.cdf.failures},
            table.cdf.valid, ConstantsTarget.regular().as_dict())


def cmd_legendre(cfg: RunConfig):
    tg = ConstantsTarget.for_k(cfg.k)
    if cfg.c_grid is not None:
        c_grid = [float(c) for c in parse_grid(cfg.c_grid)]
    else:
        c_grid = [float(f) * tg.lenstra_target for f in parse_grid(cfg.c_factors)]
    rep = legendre_scan(cfg.k, c_grid, cfg.q_bound, cfg.samples, cfg.seed, cfg.seed_mode, workers=cfg.workers)
    rows = []
    for c in rep.c_grid:
        ws = rep.witnesses[c]
        first = ws[0] if ws else None
        rows.append([c, c / tg.lenstra_target, rep.violations[c], rep.samples,
                     first.x if first else "", f"{first.p}/{first.q}" if first else "",
                     first.theta if first else math.nan])
    summary = {"violations": {repr(c): v for c, v in rep.violations.items()},
               "witnesses": {repr(c): [{"x": w.x, "p": w.p, "q": w.q, "theta": w.theta} for w in ws]
                             for c, ws in rep.witnesses.items()},
               "replayed": rep.replayed}
    for c in rep.c_grid:
        print(f"c = {c!r}: {rep.violations[c]} of {rep.samples} samples with a violation")
    return (["c", "c_over_target", "violating_samples", "samples", "witness_x", "witness_point", "witness_theta"],
            rows, summary, {"undecided": rep.skipped}, rep.skipped == 0, tg.as_dict())


def cmd_count(cfg: RunConfig):
    tg = ConstantsTarget.for_k(cfg.k)
    t_grid = parse_grid(cfg.t_grid)
    n_grid = [int(n) for n in parse_grid(cfg.n_grid)]
    rows = []
    if cfg.x is not None:
        x = _parse_x(cfg, rosen(cfg.k))
        reports = [count_solutions(x, t_grid, n_grid, cfg.k)]
        samples = 1
    else:
        summ = counting_experiment(cfg.k, t_grid, n_grid, cfg.samples, cfg.seed, cfg.workers)
        reports = summ.reports
        samples = cfg.samples
    undecided = 0
    for t in t_grid:
        for N in n_grid:
            key = (float(t), N)
            counts = [r.counts[key] for r in reports]
            und = sum(r.undecided[key] for r in reports)
            undecided += und
            mean = sum(counts) / len(counts)
            target = tg.theorem1_slope(float(t))
            slope = mean / math.log(N)
            rows.append([float(t), N, samples, mean, slope, target, (slope - target) / target, und,
                         int(t >= Fraction(1, 2))])
    summary = {"flagged_t": sorted({float(t) for t in t_grid if t >= Fraction(1, 2)})}
    for r in rows:
        print(f"t = {r[0]!r}, N = {r[1]}: mean count {r[3]!r}, count/ln N {r[4]!r} (target {r[5]!r})")
    return (["t", "N", "samples", "mean_count", "slope_estimate", "target_slope", "relative_error",
             "undecided", "flagged"], rows, summary, {"undecided": undecided}, undecided == 0, tg.as_dict())


def cmd_t0(cfg: RunConfig):
    m = min_abs_c(cfg.k, cfg.probe_bound)
    t0 = compute_t0(cfg.k, cfg.probe_bound)
    print(f"k = {cfg.k}: min |c| = {m!r}, t0 = {t0!r}")
    return (["k", "probe_bound", "min_abs_c", "t0"], [[cfg.k, cfg.probe_bound, m, t0]],
            {"t0": t0, "min_abs_c": m}, {}, True, ConstantsTarget.for_k(cfg.k).as_dict())


HANDLERS = {"expand": cmd_expand, "entropy": cmd_entropy, "lenstra": cmd_lenstra, "legendre": cmd_legendre,
            "count": cmd_count, "bjw": cmd_bjw, "t0": cmd_t0}


# ---------------------------------------------------------------------------
# output


def fmt_value(v) -> str:
    """Round-trip text for CSV fields; floats via repr, never locale dependent."""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv_field(s: str) -> str:
    if any(ch in s for ch in ',"\n'):
        return '"' + s.replace('"', '""') + '"'
    return s


def render_csv(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(_csv_field(fmt_value(v)) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    return v


def output_paths(cfg: RunConfig) -> tuple[Path, Path]:
    if cfg.output:
        out = Path(cfg.output)
    else:
        out = Path(os.environ.get(OUTPUT_DIR_ENV, ".")) / f"{cfg.command}.{cfg.format}"
    return out, out.with_name(out.stem + ".manifest.json")


def write_outputs(cfg: RunConfig, header, rows, manifest: dict) -> tuple[Path, Path]:
    out, man = output_paths(cfg)
    out.parent.mkdir(parents=True, exist_ok=True)
    if cfg.format == "csv":
        out.write_text(render_csv(header, rows), encoding="utf-8")
    else:
        recs = [dict(zip(header, row)) for row in rows]
        out.write_text(json.dumps(_json_safe({"manifest": manifest, "rows": recs}), indent=2) + "\n",
                       encoding="utf-8")
    man.write_text(json.dumps(_json_safe(manifest), indent=2) + "\n", encoding="utf-8")
    return out, man


def make_manifest(cfg: RunConfig, wall: float, failures: dict, valid: bool, targets, summary, code: int) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "config": cfg.echo(),
        "seed_mixer": SEED_MIXER,
        "wall_time_s": wall,
        "failures": failures,
        "valid": valid,
        "exit_code": code,
        "targets": targets,
        "summary": summary,
    }


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv[:1] == ["rerun"]:
        rp = argparse.ArgumentParser(prog="rosencf rerun")
        rp.add_argument("--manifest", required=True)
        rp.add_argument("--output", default=None)
        rp.add_argument("--workers", type=int, default=1)
        try:
            ra = rp.parse_args(argv[1:])
            config = json.loads(Path(ra.manifest).read_text(encoding="utf-8"))["config"]
            argv = config_to_argv(config, ra.output, ra.workers)
        except SystemExit as exc:
            return int(exc.code or 0) and EXIT_CONFIG
        except (OSError, KeyError, ValueError) as exc:
            print(f"invalid manifest: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_CONFIG
    try:
        cfg = make_config(ns)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    t_start = time.perf_counter()
    try:
        header, rows, summary, failures, valid, targets = HANDLERS[cfg.command](cfg)
        code = EXIT_OK if valid else EXIT_PRECISION
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PrecisionCapError as exc:
        print(f"precision cap reached: {exc}", file=sys.stderr)
        header, rows, summary, failures, valid, targets = [], [], {"error": str(exc)}, {"precision": 1}, False, None
        code = EXIT_PRECISION
    except BudgetExceeded as exc:
        print(f"enumeration budget exhausted: {exc}", file=sys.stderr)
        header, rows, summary, failures, valid, targets = [], [], {"error": str(exc)}, {"budget": 1}, False, None
        code = EXIT_BUDGET
    wall = time.perf_counter() - t_start
    manifest = make_manifest(cfg, wall, failures, valid, targets, summary, code)
    out, man = write_outputs(cfg, header, rows, manifest)
    print(f"wrote {out} and {man}")
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
