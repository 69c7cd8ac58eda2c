"""Command-line front end: ``charexp <command> [options]``.

Exit status is 0 on success, 1 on a computational failure (bound
violation, non-convergence, failed verification) and 2 on a usage or input
error.  Errors are reported on stderr as a JSON object.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from . import io as cio
from .errors import ComputationError
from .families import Potential, parse_cutoff, parse_functional
from .measures import DiscreteMeasure, GridMeasure, measure_from_csv, spectrum_points
from .sampling import RngStream, set_default_workers
from .spherical import SpectrumSet

FORMATS = ("csv", "json")


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class Emit:
    """One output item; ``kind`` forces csv or json, otherwise ``--format`` decides."""

    name: str
    payload: dict
    header: tuple | None = None
    rows: list | None = None
    kind: str | None = None
    extra_meta: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# argument helpers


def parse_measure(text: str):
    """``dirac:x``, ``uniform:a:b[:n]``, ``atoms:x1,x2,...`` or a path to a measure CSV."""
    kind, _, arg = text.partition(":")
    kind = kind.strip().lower()
    if kind == "dirac":
        return DiscreteMeasure.dirac(float(arg))
    if kind == "uniform":
        vals = arg.split(":")
        n = int(vals[2]) if len(vals) > 2 else 1
        return GridMeasure.uniform(float(vals[0]), float(vals[1]), n)
    if kind == "atoms":
        return DiscreteMeasure.uniform([float(t) for t in arg.split(",")])
    path = Path(text)
    if not path.exists():
        raise UsageError(f"measure {text!r}: not a family spec and no such file")
    return measure_from_csv(path.read_text(encoding="utf-8"))


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _ensemble(args):
    from .ratefun import EnsembleSpec

    mu_A = parse_measure(args.mu_A)
    mu_B = parse_measure(args.mu_B)
    if isinstance(mu_A, GridMeasure):
        mu_A = mu_A.to_atoms(4)
    if isinstance(mu_B, GridMeasure):
        mu_B = mu_B.to_atoms(4)
    return EnsembleSpec(Potential.parse(args.c, args.scale), args.a, args.b, mu_A, mu_B, parse_functional(args.F))


def _add_ensemble_args(p):
    p.add_argument("--c", default="x^2-x", help="potential polynomial in x")
    p.add_argument("--scale", type=float, default=1.0, help="multiplier applied to the potential")
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--b", type=float, default=0.0)
    p.add_argument("--mu-A", dest="mu_A", default="dirac:1")
    p.add_argument("--mu-B", dest="mu_B", default="dirac:1")
    p.add_argument("--F", default="zero", help="zero | constant:v | linear:alpha | quadratic:alpha")


def _measure_rows(mu):
    if isinstance(mu, GridMeasure):
        return ("x", "rho"), [(float(x), float(r)) for x, r in zip(mu.midpoints, mu.rho)], "density"
    return ("position", "weight"), [(float(x), float(w)) for x, w in mu.atoms], "atoms"


# --------------------------------------------------------------------------
# command handlers


def cmd_schur(args):
    from .symfun import schur_bialternant, schur_branching
    from .tableaux import YoungShape

    shape = YoungShape.parse(args.shape)
    x = SpectrumSet.parse(args.x).values
    out = {"shape": str(shape), "x": x.tolist()}
    if args.route in ("branching", "compare"):
        out["branching"] = float(schur_branching(shape, x))
    if args.route in ("bialternant", "compare"):
        out["bialternant"] = float(schur_bialternant(shape, x))
    if args.route == "compare":
        out["rel_diff"] = abs(out["bialternant"] - out["branching"]) / abs(out["branching"])
    cols = [k for k in ("branching", "bialternant", "rel_diff") if k in out]
    return [Emit("schur", out, ("shape", *cols), [(str(shape), *[out[k] for k in cols])])]


def cmd_hciz(args):
    from .spherical import cutoff_sandwich, hciz_exact, hciz_mc, jensen_bounds

    D, E = SpectrumSet.parse(args.d), SpectrumSet.parse(args.e)
    if args.mode == "exact":
        v = hciz_exact(D, E, ties=args.ties)
        out = {"log_value": v.log_value, "value": v.value, "method": v.method, "perturbed": v.perturbed}
    elif args.mode == "mc":
        v = hciz_mc(D, E, args.samples, RngStream(args.seed, 1))
        out = {"log_value": v.log_value, "value": v.value, "stderr": v.stderr, "samples": v.n}
    else:
        if args.M is None:
            raise UsageError("hciz sandwich needs --M")
        lo, mid, hi = cutoff_sandwich(D, E, args.M)
        jlo, jval, jhi = jensen_bounds(D, E)
        out = {"lower": lo, "log_value": mid, "upper": hi, "M": args.M,
               "jensen_lower": jlo, "normalized_log_value": jval, "jensen_upper": jhi}
    return [Emit("hciz", out, tuple(out), [tuple(out.values())])]


def cmd_partition(args):
    from .partition import ModelSpec, free_energy_sequence, partition_character_ratio, partition_mc_ratio, validate_hypotheses

    stream = RngStream(args.seed, 2)
    phi = parse_cutoff(args.phi)
    if args.mode == "free-energy":
        mu_A, mu_B = parse_measure(args.mu_A), parse_measure(args.mu_B)
        specs = [ModelSpec(spectrum_points(mu_A, N), spectrum_points(mu_B, N), phi) for N in _int_list(args.N_list)]
        seq = free_energy_sequence(specs, args.samples, stream)
        rows = [(N, f, s) for N, f, s in seq]
        return [Emit("free_energy", {"rows": [dict(N=N, free_energy=f, stderr=s) for N, f, s in seq]},
                     ("N", "free_energy", "stderr"), rows)]
    if args.A is None or args.B is None:
        raise UsageError("partition mc/character needs --A and --B")
    spec = ModelSpec(SpectrumSet.parse(args.A), SpectrumSet.parse(args.B), phi)
    hyp = validate_hypotheses(spec)
    if args.mode == "mc":
        est = partition_mc_ratio(spec, args.samples, stream)
        out = {"ratio": est.mean, "stderr": est.stderr, "samples": est.n, "hypotheses": hyp}
        return [Emit("partition", out, ("ratio", "stderr", "samples"), [(est.mean, est.stderr, est.n)])]
    est, rep = partition_character_ratio(spec, args.K, args.samples, stream)
    out = {**rep.as_dict(), "hypotheses": hyp}
    rows = [(str(s), t) for s, t in rep.term_means]
    return [Emit("partition", out, ("shape", "term"), rows)]


def cmd_rate(args):
    from .ratefun import rate_H, rate_H_cutoff

    nu = parse_measure(args.measure)
    if not isinstance(nu, GridMeasure):
        raise UsageError("rate needs a density measure")
    ens = _ensemble(args)
    rep = rate_H(nu, ens, strict=args.strict)
    out = rep.to_dict()
    if args.M is not None:
        out["H_cutoff"] = rate_H_cutoff(nu, ens, args.M)
        out["M"] = args.M
    out["ensemble"] = ens.describe()
    lo, hi = rep.bracket
    return [Emit("rate", out, ("H", "H_lo", "H_hi", "H_tilde", "in_L"), [(rep.value, lo, hi, rep.tilde_value, rep.in_L)])]


def cmd_minimize(args):
    from .equilibrium import Grid, default_grid, minimize_over_L

    ens = _ensemble(args)
    grid = Grid.parse(args.grid) if args.grid else default_grid(ens, cap=args.cap)
    res = minimize_over_L(ens, grid, cap=args.cap, tol=args.tol, max_iter=args.max_iter)
    head, rows, kind = _measure_rows(res.measure)
    info = res.to_dict()
    return [
        Emit("minimizer", {"rows": rows}, head, rows, kind="csv", extra_meta={"kind": kind}),
        Emit("kkt", info, kind="json"),
    ]


def cmd_gibbs(args):
    from .shape_gibbs import metropolis_sample

    ens = _ensemble(args)
    summary, profile, _ = metropolis_sample(
        args.N, args.steps, ens, RngStream(args.seed, 3), burn_in=args.burn_in, max_boxes=args.max_boxes
    )
    head, rows, kind = _measure_rows(profile)
    return [
        Emit("profile", {"rows": rows}, head, rows, kind="csv", extra_meta={"kind": kind}),
        Emit("chain", summary.to_dict(), kind="json"),
    ]


def cmd_yangmills(args):
    from .yangmills import ym_free_energy_trend, ym_partition

    if args.mode == "partition":
        if args.A is None or args.B is None:
            raise UsageError("yangmills partition needs --A and --B")
        v = ym_partition(SpectrumSet.parse(args.A), SpectrumSet.parse(args.B), args.T, K=args.K)
        out = {"value": v.value, "tail_bound": v.tail_bound, "K": v.K}
        return [Emit("yangmills", out, tuple(out), [tuple(out.values())])]
    rep = ym_free_energy_trend(parse_measure(args.mu_A), parse_measure(args.mu_B), args.T, _int_list(args.N_list))
    tab = rep.table()
    out = {
        "rows": [dict(zip(tab[0], r)) for r in tab[1:]],
        "variational": rep.variational,
        "bracket": list(rep.bracket),
        "components": rep.components,
    }
    return [Emit("yangmills_trend", out, tab[0], tab[1:])]


def cmd_verify(args):
    from .acceptance import run_all

    only = set(_int_list(args.only)) if args.only else None
    stream = sys.stderr if args.out is None and args.format == "json" else sys.stdout

    def echo(r):
        print(r.line(timing=False), file=stream, flush=True)

    results = run_all(args.seed, only, echo=echo)
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed", file=stream, flush=True)
    out = {"results": [r.as_dict() for r in results], "passed": passed, "total": len(results)}
    rows = [(r.number, r.name, "pass" if r.passed else "fail") for r in results]
    em = [Emit("verify", out, ("criterion", "name", "status"), rows)]
    return em, (0 if passed == len(results) else 1)


HANDLERS = {
    "schur": cmd_schur,
    "hciz": cmd_hciz,
    "partition": cmd_partition,
    "rate": cmd_rate,
    "minimize": cmd_minimize,
    "gibbs": cmd_gibbs,
    "yangmills": cmd_yangmills,
    "verify": cmd_verify,
}


# --------------------------------------------------------------------------
# parser and configuration


GLOBAL_DEFAULTS = {"seed": 0, "samples": 10_000, "out": None, "format": "json", "config": None, "workers": None}


def _global_args(p, suppress: bool):
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    p.add_argument("--seed", type=int, **(kw or {"default": GLOBAL_DEFAULTS["seed"]}))
    p.add_argument("--samples", type=int, **(kw or {"default": GLOBAL_DEFAULTS["samples"]}))
    p.add_argument("--out", **(kw or {"default": None}), help="directory for output files (default: stdout)")
    p.add_argument("--format", choices=FORMATS, **(kw or {"default": GLOBAL_DEFAULTS["format"]}))
    p.add_argument("--config", **(kw or {"default": None}), help="flat key = value file; flags take precedence")
    p.add_argument("--workers", type=int, **(kw or {"default": None}))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="charexp", description="Character expansions, spherical integrals and shape rate functions.")
    parser.add_argument("--version", action="version", version=f"charexp {__version__}")
    _global_args(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _Parser(add_help=False)
    _global_args(common, suppress=True)

    p = sub.add_parser("schur", parents=[common], help="evaluate a Schur polynomial")
    p.add_argument("--shape", required=True, help="e.g. 3,1,1")
    p.add_argument("--x", required=True, help="comma-separated variables")
    p.add_argument("--route", choices=("branching", "bialternant", "compare"), default="compare")

    p = sub.add_parser("hciz", parents=[common], help="spherical integral")
    p.add_argument("mode", choices=("exact", "mc", "sandwich"))
    p.add_argument("--d", required=True)
    p.add_argument("--e", required=True)
    p.add_argument("--ties", choices=("raise", "perturb"), default="raise")
    p.add_argument("--M", type=float)

    p = sub.add_parser("partition", parents=[common], help="cut-off matrix model")
    p.add_argument("mode", choices=("mc", "character", "free-energy"))
    p.add_argument("--A")
    p.add_argument("--B")
    p.add_argument("--phi", default="constant:0.5", help="constant:v | rational:p/q | logistic:lo,hi,k,x0")
    p.add_argument("--K", type=int, default=10)
    p.add_argument("--mu-A", dest="mu_A", default="dirac:0.5")
    p.add_argument("--mu-B", dest="mu_B", default="dirac:0.5")
    p.add_argument("--N-list", dest="N_list", default="2,3,4")

    p = sub.add_parser("rate", parents=[common], help="evaluate the shape rate function on a measure")
    p.add_argument("--measure", required=True, help="measure file or family spec (uniform:a:b:n)")
    p.add_argument("--M", type=float, help="also report the cut-off functional at level M")
    p.add_argument("--strict", action="store_true")
    _add_ensemble_args(p)

    p = sub.add_parser("minimize", parents=[common], help="solve the capped equilibrium problem")
    _add_ensemble_args(p)
    p.add_argument("--grid", help="x0:x_max:n or x_max:n")
    p.add_argument("--cap", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=100_000)

    p = sub.add_parser("gibbs", parents=[common], help="Metropolis chain on Young shapes")
    _add_ensemble_args(p)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--steps", type=int, default=100_000)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--max-boxes", dest="max_boxes", type=int)

    p = sub.add_parser("yangmills", parents=[common], help="Yang-Mills heat kernel on the cylinder")
    p.add_argument("mode", choices=("partition", "trend"))
    p.add_argument("--A")
    p.add_argument("--B")
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--K", type=int)
    p.add_argument("--mu-A", dest="mu_A", default="dirac:1")
    p.add_argument("--mu-B", dest="mu_B", default="dirac:1")
    p.add_argument("--N-list", dest="N_list", default="2,4,8,16")

    p = sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    p.add_argument("--only", help="comma-separated criterion numbers")
    return parser


def read_config(path: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; dashes in keys map to underscores."""
    out = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise UsageError(f"{path}:{n}: expected key = value")
        k, v = (t.strip() for t in s.split("=", 1))
        out[k.lstrip("-").replace("-", "_")] = v
    return out


def _explicit_dests(parser, sub, argv) -> set:
    flags = {a.split("=", 1)[0] for a in argv if a.startswith("--")}
    dests = set()
    for p in (parser, sub):
        for act in p._actions:
            if flags.intersection(act.option_strings):
                dests.add(act.dest)
    return dests


def _apply_config(parser, args, argv):
    cfg = read_config(args.config)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    explicit = _explicit_dests(parser, sub, argv)
    actions = {a.dest: a for a in sub._actions + parser._actions if a.dest not in ("help", "version")}
    for k, v in cfg.items():
        if k in ("command", "config") or k in explicit:
            continue
        act = actions.get(k)
        if act is None:
            raise UsageError(f"unknown config key {k!r}")
        if isinstance(act, argparse._StoreTrueAction):
            val = v.lower() in ("1", "true", "yes", "on")
        else:
            val = act.type(v) if act.type else v
            if act.choices is not None and val not in act.choices:
                raise UsageError(f"config {k}={v!r}: choose from {sorted(act.choices)}")
        setattr(args, k, val)


_NUMERIC_LIST = re.compile(r"^-[\d.]")


def _join_negative_values(argv: list[str]) -> list[str]:
    """Attach values like ``-1,-0.5`` to the preceding flag so they are not read as options."""
    out: list[str] = []
    for tok in argv:
        if out and _NUMERIC_LIST.match(tok) and out[-1].startswith("--") and "=" not in out[-1]:
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def parse_args(argv) -> argparse.Namespace:
    argv = _join_negative_values(list(argv))
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        _apply_config(parser, args, argv)
    return args


# --------------------------------------------------------------------------
# emission


def _params(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "format", "config")}


def _render(item: Emit, fmt: str, meta: dict) -> tuple[str, str]:
    kind = item.kind or fmt
    m = {**meta, **item.extra_meta}
    if kind == "csv" and item.rows is not None:
        return "csv", cio.to_csv(item.header, item.rows, m)
    return "json", cio.to_json(item.payload, m)


def emit(items, args) -> None:
    meta = cio.metadata(args.command, _params(args), args.seed)
    for item in items:
        ext, text = _render(item, args.format, meta)
        if args.out:
            cio.write_text(Path(args.out) / f"{item.name}.{ext}", text)
        else:
            sys.stdout.write(text)


def _error(exc: BaseException, code: int) -> int:
    msg = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    clause = getattr(exc, "clause", None)
    if clause:
        msg["clause"] = clause
    sys.stderr.write(json.dumps(msg, sort_keys=True) + "\n")
    return code


def run(argv=None) -> int:
    """Run one command; returns the exit status instead of exiting."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
        if args.workers is not None:
            set_default_workers(args.workers)
        res = HANDLERS[args.command](args)
        items, code = res if isinstance(res, tuple) else (res, 0)
        emit(items, args)
        return code
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (ComputationError, ArithmeticError) as exc:
        return _error(exc, 1)
    except (ValueError, TypeError, OSError, KeyError) as exc:
        return _error(exc, 2)
    except RuntimeError as exc:
        return _error(exc, 1)


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
