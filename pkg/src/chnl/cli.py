"""
Command-line driver.

    chnl run CONFIG [--out DIR] [--seed N] [--snapshot-every N] [--quiet]
    chnl sweep-delta CONFIG --ladder 1e-2,1e-3,...
    chnl sweep-sigma CONFIG --ladder 1e-1,1e-2,...
    chnl refine CONFIG --levels N
    chnl dispersion CONFIG
    chnl check
    chnl resume CHECKPOINT CONFIG

Exit codes: 0 success, 1 invalid input, 2 step failure, 3 check failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

from .config import parse_config, write_config
from .errors import ChnlError, FormatError, ParseError, StepFailure, ValidationError
from .io import read_checkpoint, write_snapshot
from .model import SimState

log = logging.getLogger("chnl")

EXIT_OK, EXIT_INPUT, EXIT_STEP, EXIT_CHECK = 0, 1, 2, 3


class _Fail(Exception):
    def __init__(self, code, where, exc):
        super().__init__(f"{where}: {exc}")
        self.code = code


def _ladder(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if len(vals) < 2:
        raise argparse.ArgumentTypeError("a ladder needs at least two values")
    return vals


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _load(args):
    """Parse the config and apply command-line overrides."""
    try:
        cfg = parse_config(args.config)
        kw = {}
        if args.out is not None:
            kw["out"] = args.out
        if args.seed is not None:
            kw["seed"] = args.seed
        if args.snapshot_every is not None:
            kw["snapshot_every"] = args.snapshot_every
        return cfg.replace(**kw) if kw else cfg
    except (ParseError, ValidationError) as exc:
        raise _Fail(EXIT_INPUT, "config.parse_config", exc) from exc
    except OSError as exc:
        raise _Fail(EXIT_INPUT, "config.parse_config", exc) from exc


def _outdir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _integrate(cfg, initial, *, step_offset=0, record_initial=True):
    from .stepper import run

    out = _outdir(cfg.out)
    try:
        return run(initial, cfg.stepper(), cfg.params(), cfg.diagnostics_every,
                   checkpoint_every=cfg.checkpoint_every, checkpoint_dir=out,
                   snapshot_every=cfg.snapshot_every, snapshot_dir=out,
                   record_initial=record_initial, step_offset=step_offset, keep_states=False)
    except StepFailure as exc:
        partial = exc.partial
        if partial is not None and len(partial.series):
            partial.series.to_csv(os.path.join(out, "diagnostics.csv"))
        raise _Fail(EXIT_STEP, "stepper.run", f"{exc} (t = {partial.final.t if partial else float('nan'):.6g})") \
            from exc


def _summary(res, out):
    s = res.series
    e = s.column("energy")
    log.info("t = %.6g  steps = %d  energy %.10g -> %.10g  sup|u| = %.6g",
             res.final.t, len(res.reports), e[0], e[-1], s[-1].sup_u)
    log.info("wrote %s", out)


def cmd_run(args) -> int:
    cfg = _load(args)
    u0 = cfg.scenario().initial_field()
    out = _outdir(cfg.out)
    write_config(cfg, os.path.join(out, "config.cfg"))
    write_snapshot(u0, os.path.join(out, "u_000000.snap"), 0.0)
    res = _integrate(cfg, u0)
    res.series.to_csv(os.path.join(out, "diagnostics.csv"))
    write_snapshot(res.final.u, os.path.join(out, "u_final.snap"), res.final.t)
    _summary(res, out)
    return EXIT_OK


def cmd_resume(args) -> int:
    cfg = _load(args)
    try:
        t, tau, u, w = read_checkpoint(args.checkpoint)
    except (FormatError, OSError) as exc:
        raise _Fail(EXIT_INPUT, "io.read_checkpoint", exc) from exc
    if u.domain != cfg.domain():
        raise _Fail(EXIT_INPUT, "cli.resume", ValidationError("cells,lengths,bc", "checkpoint grid differs from config"))
    if tau != cfg.tau:
        log.warning("checkpoint step %.6g overrides tau = %.6g from the config", tau, cfg.tau)
        cfg = cfg.replace(tau=tau)
    out = _outdir(cfg.out)
    path = os.path.join(out, "diagnostics.csv")
    # keep the rows written before the checkpoint so the file reads as one run
    kept = []
    if os.path.exists(path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        kept = [r for r in rows[1:] if float(r[0]) <= t]
    res = _integrate(cfg, SimState(t, u, w), step_offset=round(t / tau), record_initial=not kept)
    text = res.series.to_csv()
    if kept:
        head, *body = text.splitlines(keepends=True)
        buf = [head] + [",".join(r) + "\n" for r in kept] + body
        text = "".join(buf)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    write_snapshot(res.final.u, os.path.join(out, "u_final.snap"), res.final.t)
    _summary(res, out)
    return EXIT_OK


def _sweep(args, kind) -> int:
    from .diagnostics import sweep_delta, sweep_sigma

    cfg = _load(args)
    sc = cfg.scenario()
    try:
        if kind == "delta":
            rep = sweep_delta(sc, args.ladder, require_concave=args.require_concave, workers=args.workers)
        else:
            rep = sweep_sigma(sc, args.ladder, workers=args.workers)
    except ValueError as exc:
        raise _Fail(EXIT_INPUT, f"diagnostics.sweep_{kind}", exc) from exc
    except StepFailure as exc:
        raise _Fail(EXIT_STEP, f"diagnostics.sweep_{kind}", exc) from exc
    out = _outdir(cfg.out)
    text = rep.to_csv(os.path.join(out, "sweep.csv"))
    if not args.quiet:
        sys.stdout.write(text)
    log.info("observed order %.4g, strictly decreasing: %s", rep.observed_order, rep.strictly_decreasing)
    return EXIT_OK


def cmd_refine(args) -> int:
    from .diagnostics import refine

    cfg = _load(args)
    try:
        rep = refine(cfg.scenario(), args.levels, workers=args.workers)
    except ValueError as exc:
        raise _Fail(EXIT_INPUT, "diagnostics.refine", exc) from exc
    except StepFailure as exc:
        raise _Fail(EXIT_STEP, "diagnostics.refine", exc) from exc
    out = _outdir(cfg.out)
    text = rep.to_csv(os.path.join(out, "sweep.csv"))
    if not args.quiet:
        sys.stdout.write(text)
    log.info("observed order %.4g", rep.observed_order)
    return EXIT_OK


def cmd_dispersion(args) -> int:
    from .diagnostics import dispersion_check

    cfg = _load(args)
    try:
        rows = dispersion_check(cfg.params(), cfg.domain(), modes=tuple(args.modes), steps=args.steps)
    except (ValueError, ChnlError) as exc:
        code = EXIT_STEP if isinstance(exc, StepFailure) else EXIT_INPUT
        raise _Fail(code, "diagnostics.dispersion_check", exc) from exc
    out = _outdir(cfg.out)
    lines = ["mode,wavenumber,symbol,mu_numeric,mu_analytic,rel_err"]
    for r in rows:
        lines.append(f"{r.mode},{r.wavenumber!r},{r.symbol!r},{r.mu_numeric!r},{r.mu_analytic!r},{r.rel_err!r}")
    with open(os.path.join(out, "dispersion.csv"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    if not args.quiet:
        print(f"{'mode':>4} {'k':>10} {'mu_numeric':>14} {'mu_analytic':>14} {'rel_err':>10}")
        for r in rows:
            print(f"{r.mode:>4} {r.wavenumber:>10.5f} {r.mu_numeric:>14.6f} {r.mu_analytic:>14.6f} {r.rel_err:>10.2e}")
    return EXIT_OK


def cmd_check(args) -> int:
    from .checks import run_checks

    results = run_checks(args.module or None)
    failed = [r for r in results if not r.ok]
    groups: dict[str, list] = {}
    for r in results:
        groups.setdefault(r.module, []).append(r)
    for module, rs in groups.items():
        bad = [r for r in rs if not r.ok]
        print(f"{'FAIL' if bad else 'PASS'}  {module:<12} {len(rs) - len(bad)}/{len(rs)}")
        for r in rs:
            if not r.ok:
                print(f"      {module}: {r.name}: {r.detail}")
            elif not args.quiet:
                print(f"      ok  {r.name}  ({r.detail}; {r.seconds:.2f}s)")
    return EXIT_CHECK if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--seed", type=_u64, help="noise seed (overrides the config)")
    common.add_argument("--snapshot-every", type=int, dest="snapshot_every", help="snapshot cadence in steps")
    common.add_argument("--quiet", action="store_true", help="only report errors")

    p = argparse.ArgumentParser(prog="chnl", description="Cahn-Hilliard simulator with viscous, sixth-order "
                                "and phase-field variants.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("run", parents=[common], help="integrate one configuration")
    s.add_argument("config")
    s.set_defaults(fn=cmd_run)

    for name, kind in (("sweep-delta", "delta"), ("sweep-sigma", "sigma")):
        s = sub.add_parser(name, parents=[common], help=f"{kind}-ladder convergence study")
        s.add_argument("config")
        s.add_argument("--ladder", type=_ladder, required=True)
        s.add_argument("--workers", type=int, default=1)
        if kind == "delta":
            s.add_argument("--require-concave", action="store_true", dest="require_concave",
                           help="reject coefficients that are not concave on [-1, 1]")
        s.set_defaults(fn=lambda a, k=kind: _sweep(a, k))

    s = sub.add_parser("refine", parents=[common], help="mesh refinement study")
    s.add_argument("config")
    s.add_argument("--levels", type=int, required=True)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(fn=cmd_refine)

    s = sub.add_parser("dispersion", parents=[common], help="linear decay rates against the analytic symbol")
    s.add_argument("config")
    s.add_argument("--modes", type=int, nargs="+", default=[1, 2, 3])
    s.add_argument("--steps", type=int, default=1000)
    s.set_defaults(fn=cmd_dispersion)

    s = sub.add_parser("check", help="run the built-in invariant suite")
    s.add_argument("--module", action="append", help="restrict to one module (repeatable)")
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(fn=cmd_check)

    s = sub.add_parser("resume", parents=[common], help="continue a run from a checkpoint")
    s.add_argument("checkpoint")
    s.add_argument("config")
    s.set_defaults(fn=cmd_resume)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr, force=True)
    try:
        return args.fn(args)
    except _Fail as exc:
        print(f"chnl {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except (ValidationError, ParseError) as exc:
        print(f"chnl {args.command}: config.validate: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
