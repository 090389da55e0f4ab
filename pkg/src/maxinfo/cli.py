"""``maxinfo`` command-line front end.

Exit codes: 0 success, 1 usage or configuration error, 2 failed verification,
3 numerical degeneracy.  Failures print one line ``maxinfo: <kind>: <reason>``
to stderr.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import hilbert, histories as hs, selection as se, spinmodel as sm
from .config import ConfigError, ExperimentConfig, parse_config
from .report import Table, complex_columns, emit_report

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_DEGENERATE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class VerificationFailed(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="YAML experiment config")
    common.add_argument("-n", type=int, help="number of environment spins")
    common.add_argument("--seed", type=int, help="master seed (default 0)")
    common.add_argument("--output", "-o", help="output path (default stdout)")
    common.add_argument("--format", choices=["csv", "jsonl"], help="output format (default csv)")
    common.add_argument("--consistency-tol", type=float, help="off-diagonal tolerance (default 1e-9)")
    common.add_argument("--genericity-tol", type=float, help="genericity margin (default 1e-6)")
    common.add_argument("--tie-tol", type=float, help="selection tie tolerance (default 1e-10)")

    parser = _Parser(prog="maxinfo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("schmidt", parents=[common], help="Schmidt weights and axis on a time grid")
    p.add_argument("--grid", type=int, help="points per interaction (default 25)")
    p = sub.add_parser("evolve", parents=[common], help="dump |psi(t)>")
    p.add_argument("-t", "--time", type=float, help="evolution time (default 0)")
    p = sub.add_parser("dmatrix", parents=[common], help="decoherence matrix of a Schmidt set")
    p.add_argument("--times", type=_floats, help="projection times, e.g. '1,1.5,2'")
    p = sub.add_parser("classify", parents=[common], help="two-time consistency scan")
    p.add_argument("--grid", type=int, help="points per interaction (default 25)")
    sub.add_parser("select", parents=[common], help="maximum-information selection")
    p = sub.add_parser("montecarlo", parents=[common], help="selection statistics")
    p.add_argument("--samples", type=float, help="number of random configurations (default 1e5)")
    p.add_argument("--workers", type=int, help="processes (default $MAXINFO_THREADS or 1)")
    p = sub.add_parser("compare-il", parents=[common], help="minimum information-entropy set")
    p.add_argument("--max-times", type=int, help="cap on projection times (default n+2)")
    p.add_argument("--grid", type=int, help="interior grid points per interaction (default 25)")
    sub.add_parser("verify", parents=[common], help="run the oracle suite")
    return parser


def _load(args) -> ExperimentConfig:
    overrides = {
        "model.n": args.n,
        "model.seed": args.seed,
        "run.seed": args.seed,
        "run.output": args.output,
        "run.format": args.format,
        "tolerances.consistency_tol": args.consistency_tol,
        "tolerances.genericity_tol": args.genericity_tol,
        "tolerances.tie_tol": args.tie_tol,
        "run.grid": getattr(args, "grid", None),
        "run.t": getattr(args, "time", None),
        "run.times": getattr(args, "times", None),
        "run.samples": int(args.samples) if getattr(args, "samples", None) else None,
        "run.workers": getattr(args, "workers", None),
        "run.max_times": getattr(args, "max_times", None),
    }
    return parse_config(args.config, overrides)


def _meta(cfg: ExperimentConfig, command: str, model: sm.SpinModelConfig | None, **extra):
    meta = {"command": command, "config": cfg.as_dict()}
    if model is not None:
        meta["directions"] = {"v": model.v.tolist(), "u": [u.tolist() for u in model.u]}
    meta.update(extra)
    return meta


def cmd_schmidt(cfg, model):
    rows = []
    for t in sm.InteractionSchedule(model.n).grid(cfg.run.grid):
        sd = hilbert.schmidt_decompose(sm.evolve(model, t))
        w, nv = sm.schmidt_axis(model, t)
        rows.append([t, sd.weights[0], sd.weights[1], nv, *w])
    return Table(["t", "weight_plus", "weight_minus", "N", "w_x", "w_y", "w_z"], rows)


def cmd_evolve(cfg, model):
    psi = sm.evolve(model, cfg.run.t, check=True).amplitudes
    return Table(["index", *complex_columns("amp")], [[i, a.real, a.imag] for i, a in enumerate(psi)])


def cmd_dmatrix(cfg, model):
    if not cfg.run.times:
        raise UsageError("dmatrix needs --times")
    dmat = sm.brute_force_decoherence(model, cfg.run.times)
    rep = hs.consistency_check(dmat, "medium", cfg.tolerances.consistency_tol)
    names = [h.name for h in dmat.histories]
    rows = [
        [names[a], names[b], dmat.entries[a, b].real, dmat.entries[a, b].imag]
        for a in range(len(names))
        for b in range(len(names))
    ]
    table = Table(["alpha", "beta", *complex_columns("D")], rows)
    table.meta["consistent"] = rep.consistent
    table.meta["max_offdiag"] = rep.max_offdiag
    return table


def cmd_classify(cfg, model):
    rep = sm.classify_pairs(
        model, cfg.run.grid, cfg.tolerances.consistency_tol, cfg.tolerances.genericity_tol
    )
    rows = [[r.t, r.s, r.case_tag, r.offdiag_abs, r.consistent, r.allowed] for r in rep.rows]
    table = Table(["t", "s", "case_tag", "offdiag_abs", "consistent", "allowed"], rows)
    table.meta["mismatches"] = len(rep.mismatches)
    if rep.mismatches:
        raise VerificationFailed(f"{len(rep.mismatches)} pairs disagree with the allowed forms", table)
    return table


def cmd_select(cfg, model):
    res = se.max_info_select(model, cfg.tolerances.tie_tol)
    rows = [
        [k + 1, res.E_values[k], res.optimal_times[k], k + 1 == res.chosen_k]
        for k in range(model.n)
    ]
    table = Table(["k", "E_k", "t_opt", "chosen"], rows)
    table.meta.update(chosen_k=res.chosen_k, information=res.information, ties=list(res.ties))
    return table


def cmd_montecarlo(cfg, model):
    rep = se.montecarlo_stats(
        cfg.model.n,
        cfg.run.samples,
        cfg.run.seed,
        cfg.tolerances.genericity_tol,
        cfg.tolerances.tie_tol,
        workers=cfg.run.workers,
    )
    rows = [[k + 1, rep.counts[k], rep.fraction_by_k[k]] for k in range(rep.n)]
    table = Table(["k", "count", "fraction"], rows)
    table.meta.update(
        fraction_Sn=rep.fraction_Sn, stderr=rep.stderr, rejections=rep.rejections, samples=rep.samples
    )
    return table


def cmd_compare_il(cfg, model):
    res = se.min_il_select(model, cfg.run.max_times, interior_points=cfg.run.grid)
    rows = [[m, res.candidates_by_m[m], res.min_by_m.get(m)] for m in sorted(res.candidates_by_m)]
    table = Table(["m", "candidates", "min_s_prime"], rows)
    table.meta.update(
        selected_times=list(res.spec.times), m=res.m, s_prime=res.s_prime, s2_terms=res.s2_terms
    )
    return table


def cmd_verify(cfg, model):
    from .verify import run_verification

    results = run_verification(cfg.model.n, cfg.run.seed)
    rows = [[r.name, r.passed, r.detail, r.seconds] for r in results]
    table = Table(["check", "passed", "detail", "seconds"], rows)
    passed = sum(r.passed for r in results)
    table.meta["summary"] = f"{passed}/{len(results)} passed"
    if passed != len(results):
        raise VerificationFailed(table.meta["summary"], table)
    return table


COMMANDS = {
    "schmidt": cmd_schmidt,
    "evolve": cmd_evolve,
    "dmatrix": cmd_dmatrix,
    "classify": cmd_classify,
    "select": cmd_select,
    "montecarlo": cmd_montecarlo,
    "compare-il": cmd_compare_il,
    "verify": cmd_verify,
}
NEEDS_DENSE = {"schmidt", "evolve", "dmatrix", "classify"}


def _fail(kind: str, message: str, code: int) -> int:
    print(f"maxinfo: {kind}: {message}".replace("\n", " "), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = _load(args)
        if args.command in NEEDS_DENSE and cfg.model.n > sm.MAX_DENSE_SPINS:
            raise UsageError(f"{args.command} is capped at n={sm.MAX_DENSE_SPINS}")
        model = None if args.command in ("montecarlo", "verify") else cfg.spin_config()
        table = COMMANDS[args.command](cfg, model)
    except UsageError as exc:
        return _fail("usage", str(exc), EXIT_USAGE)
    except ConfigError as exc:
        return _fail("config", str(exc), EXIT_USAGE)
    except VerificationFailed as exc:
        message, table = exc.args
        table.meta = _meta(cfg, args.command, model, **table.meta)
        emit_report(table, cfg.run.format, cfg.run.output)
        return _fail("verification", message, EXIT_VERIFY)
    except (sm.DegenerateAxis, sm.GenericityError, hilbert.SchmidtDegenerate) as exc:
        return _fail("degenerate", str(exc), EXIT_DEGENERATE)
    except AssertionError as exc:
        return _fail("verification", str(exc), EXIT_VERIFY)
    table.meta = _meta(cfg, args.command, model, **table.meta)
    emit_report(table, cfg.run.format, cfg.run.output)
    if args.command == "verify":
        print(table.meta["summary"], file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
