"""Command line interface.

Exit codes: 0 success, 1 bad input, 2 invariant violation, 3 capacity error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .blocks import BlockSystem, GeneratorSystem, build_generator_system, verify_all
from .bounds import (
    ETA_MODES,
    ap_bound,
    ap_window,
    compute_eta,
    coloring_bound,
    coloring_window,
    corollary1_bound,
    corollary1_window,
    corollary2_bound,
    corollary2_window,
    eta_params,
    grid_bound,
    grid_window,
    sieve_bound,
    window_ok,
)
from .errors import CapacityError, InvariantViolation, WalkSieveError
from .harness import (
    ExperimentConfig,
    default_out_dir,
    emit_results,
    make_start,
    run_alon_roichman,
    run_sieve_experiment,
    wilson_interval,
)
from .instances import build_instance, densities, theta_density
from .spectral import cayley_spectrum, group_from_spec, is_delta_expander, random_generators
from .walk import WalkConfig, simulate

log = logging.getLogger("walksieve")


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.replace(";", ",").split(",") if x.strip()]


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _writer(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    return open(p, "w", newline="", encoding="utf-8"), True


def _emit_table(header, rows, out: str | None, fmt: str = "csv") -> None:
    fh, close = _writer(out)
    try:
        if fmt == "json":
            json.dump([dict(zip(header, r)) for r in rows], fh, indent=1)
            fh.write("\n")
        else:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    finally:
        if close:
            fh.close()


def _load_instance(path: str) -> BlockSystem:
    return BlockSystem.from_json(Path(path).read_text())


def _load_generators(path: str) -> GeneratorSystem:
    gs = GeneratorSystem.from_json(Path(path).read_text())
    # files may have been edited by hand; refuse asymmetric or unnormalized steps
    gs.check_invariants()
    return gs


# subcommands ----------------------------------------------------------------------------


def cmd_instance(args) -> int:
    params: dict = {}
    if args.kind == "coloring":
        params = {"R": args.R, "c": args.c, "partition": args.partition, "strict": not args.permissive}
    elif args.kind == "grid":
        params = {"R": args.R, "scale": args.scale}
        if args.widths:
            params["widths"] = _ints(args.widths)
    elif args.kind == "grid-boxes":
        boxes = [_ints(b) for b in args.boxes.split(";")] if args.boxes else [[0, 0, 1, 1]]
        params = {"boxes": boxes}
    elif args.kind == "ap":
        params = {"s": args.s, "q": args.q if args.q is not None else args.R, "c": args.c, "R": args.R,
                  "strict": not args.permissive}
    bs = build_instance(args.kind, **params)
    text = bs.to_json()
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text + "\n")
    log.info("%s instance: %d sites, %d blocks", bs.kind, len(bs.ground), bs.R)
    for blk, pats in zip(bs.blocks, bs.patterns):
        log.info("block %d: %d sites, log n = %.4g, %d patterns", blk.label, len(blk), bs.log_quotient_index(blk.label), len(pats))
    return 0


def cmd_generators(args) -> int:
    bs = _load_instance(args.instance)
    b = _floats(args.b) if args.b else None
    gs = build_generator_system(bs, args.delta, b, seed=args.seed, strict=not args.permissive, step_mode=args.step_mode)
    gs.check_invariants()
    if args.verify:
        verify_all(gs)
    text = gs.to_json()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text + "\n")
    log.info("|S| = %d, kappa = %s, C0 = %.4g", gs.size, list(gs.kappa), gs.C0)
    return 0


def cmd_spectrum(args) -> int:
    group = group_from_spec(args.group)
    if args.gens:
        S = np.asarray([_ints(g) for g in args.gens.split(";")], dtype=np.int64)
    else:
        S = random_generators(group, args.random, np.random.default_rng(args.seed))
    rep = cayley_spectrum(group, S, loop=args.loop)
    rows = [(i, repr(lam), repr(a)) for i, lam, a in rep.rows()]
    _emit_table(("character", "eigenvalue", "abs"), rows, args.out, args.format)
    summary = {
        "order": group.order,
        "degree": rep.degree,
        "paper_gap": rep.paper_gap,
        "strict_gap": rep.strict_gap,
        "connected": rep.connected,
        "bipartite": rep.bipartite,
    }
    if args.delta is not None:
        summary["expander"] = is_delta_expander(rep, args.delta, args.convention)
    sys.stderr.write(json.dumps(summary) + "\n")
    return 0


def cmd_density(args) -> int:
    bs = _load_instance(args.instance)
    labels = [args.block] if args.block is not None else list(bs.labels)
    rows = []
    if args.mode == "auto":
        for l, (d, how) in densities(bs, labels, args.cap).items():
            rows.append((l, len(bs.block(l)), bs.quotient_index(l), repr(d), how))
    else:
        for l in labels:
            d = theta_density(bs, l, args.mode, args.cap)
            rows.append((l, len(bs.block(l)), bs.quotient_index(l), repr(d), args.mode))
    _emit_table(("block", "sites", "classes", "density", "mode"), rows, args.out, args.format)
    return 0


def _eta_for(args, mode: str) -> float:
    if args.eta is not None:
        return args.eta
    if args.generators:
        return compute_eta(_load_generators(args.generators), args.delta, mode).eta
    if args.p_identity is not None and args.p_min is not None:
        return eta_params(args.p_identity, args.p_min, args.delta or 0.5, args.C0, mode).eta
    raise WalkSieveError("give --eta, --generators, or --p-identity with --p-min")


BOUND_HEADER = ("k", "mode", "term1", "term2", "term3", "total", "vacuous", "window_ok")


def cmd_bound(args) -> int:
    modes = ETA_MODES if args.eta_mode == "both" else (args.eta_mode,)
    ks = _ints(args.k)
    rows = []
    for mode in modes:
        eta = _eta_for(args, mode)
        for k in ks:
            rows.append(_bound_row(args, mode, eta, k))
    _emit_table(BOUND_HEADER, rows, args.out, args.format)
    return 0


def _bound_row(args, mode: str, eta: float, k: int):
    kind = args.kind
    c, R = args.c, args.R
    t1 = t2 = t3 = 0.0
    if kind == "sieve":
        if args.instance:
            bs = _load_instance(args.instance)
            L1 = args.L1 if args.L1 is not None else min(bs.labels)
            L2 = args.L2 if args.L2 is not None else max(bs.labels)
            labels = [l for l in bs.labels if L1 <= l <= L2]
            dens = {l: d for l, (d, _) in densities(bs, labels).items()}
            log_g = bs.log_quotient_index(max(labels))
            R = bs.R
        else:
            if args.L1 is None or args.L2 is None or args.density is None or args.log_group is None:
                raise WalkSieveError("sieve bound needs --instance or --L1 --L2 --density --log-group")
            L1, L2 = args.L1, args.L2
            labels = range(math.ceil(L1), math.floor(L2) + 1)
            dens = {l: args.density for l in labels}
            log_g = args.log_group
            R = R or math.floor(L2)
        b = {l: float(l) for l in dens}
        rep = sieve_bound(eta, k, b, dens, log_g, L1, L2, mode)
        return (k, mode, repr(rep.term1), repr(rep.term2), repr(rep.term3), repr(rep.raw),
                _flag(rep.vacuous), _flag(window_ok(L1, L2, R)))
    if kind == "coloring":
        L1 = args.L1 or 1
        i2 = args.i or 3
        total = coloring_bound(c, L1, i2, eta, k)
        t1 = (c**2 + 1) / L1
        t2 = total - t1
        ok = coloring_window(int(L1), R) if R else True
    elif kind == "coloring-exp":
        total = corollary1_bound(c, eta, k)
        t1 = total
        ok = corollary1_window(eta, k, R)
    elif kind == "coloring-sqrt":
        total = corollary2_bound(c, eta, k)
        t1 = total
        ok = corollary2_window(eta, k, R, c)
    elif kind == "grid":
        total = grid_bound(eta, k)
        t1 = total
        ok = grid_window(eta, k, R)
    elif kind == "ap":
        total = ap_bound(c, args.s, eta, k)
        t1 = total
        ok = ap_window(eta, k, R, args.s)
    else:
        raise WalkSieveError(f"unknown bound kind {kind!r}")
    return (k, mode, repr(t1), repr(t2), repr(t3), repr(total), _flag(not total < 1), _flag(ok))


def _flag(v: bool) -> str:
    return "true" if v else "false"


def cmd_walk(args) -> int:
    gs = _load_generators(args.generators)
    bs = gs.block_system
    start = make_start(bs, args.start, args.seed)
    cfg = WalkConfig(gs, start, 0, args.seed, args.backend)
    ks = sorted(set(_ints(args.k)))
    sim = simulate(cfg, ks, args.trials, include_instance=True, workers=args.workers)
    labels = sim.labels
    if args.aggregate:
        surv = sim.survived().sum(axis=0)
        rows = []
        for j, k in enumerate(ks):
            lo, hi = wilson_interval(int(surv[j]), args.trials)
            rows.append((k, args.trials, repr(float(surv[j]) / args.trials), repr(lo), repr(hi)))
        _emit_table(("k", "trials", "freq", "ci_lo", "ci_hi"), rows, args.out, args.format)
        return 0
    header = ("k", "trial") + tuple(f"block_{l}" for l in labels) + ("instance",)
    rows = []
    for j, k in enumerate(ks):
        for t in range(args.trials):
            h = sim.hits[t, j]
            rows.append((k, t) + tuple(int(x) for x in h[: len(labels)]) + (int(h[len(labels)]),))
    _emit_table(header, rows, args.out, args.format)
    return 0


def cmd_alon_roichman(args) -> int:
    rep = run_alon_roichman(
        args.group, args.b, args.delta, args.trials, args.seed, args.kappa, args.convention, args.workers
    )
    doc = rep.to_dict()
    doc["group"] = list(doc["group"])
    if args.format == "json":
        fh, close = _writer(args.out)
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
        if close:
            fh.close()
    else:
        keys = sorted(doc)
        _emit_table(keys, [[doc[k] if k != "group" else ",".join(map(str, doc[k])) for k in keys]], args.out)
    return 0


def cmd_experiment(args) -> int:
    doc = json.loads(Path(args.config).read_text()) if args.config else {}
    for key in ("seed", "trials", "delta", "workers", "backend"):
        val = getattr(args, key)
        if val is not None:
            doc[key] = val
    if args.k:
        doc["ks"] = _ints(args.k)
    if args.eta_mode:
        doc["eta_mode"] = args.eta_mode
    if args.format:
        doc["format"] = args.format
    if args.out:
        doc["out"] = args.out
    cfg = ExperimentConfig.from_dict(doc)
    res = run_sieve_experiment(cfg)
    out = cfg.out or str(default_out_dir() / f"results.{cfg.format}")
    path = emit_results(res.rows, cfg.format, out)
    log.info("wrote %d rows to %s (eta: %s)", len(res.rows), path, res.eta)
    violations = [
        r for r in res.rows
        if r.window_ok and r.bound_proof is not None and r.bound_proof < 1
        and r.freq > r.bound_proof + 3 * (r.ci_hi - r.ci_lo) / 2
    ]
    if violations:
        raise InvariantViolation(f"proof-faithful bound exceeded at k = {[r.k for r in violations]}")
    return 0


# parser ---------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="walksieve", description="Random-walk sieve experiments on labeling groups.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True, fmt=True):
        sp.add_argument("--out", help="output file (default: stdout)")
        if fmt:
            sp.add_argument("--format", choices=("csv", "json"), default="csv")
        if seed:
            sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("instance", help="build a block system and print it as JSON")
    sp.add_argument("--kind", choices=("coloring", "grid", "grid-boxes", "ap"), required=True)
    sp.add_argument("--R", type=int, default=3)
    sp.add_argument("--c", type=int, default=3)
    sp.add_argument("--partition", default="triples", choices=("triples", "triangular"))
    sp.add_argument("--scale", default="paper", choices=("paper", "reduced"))
    sp.add_argument("--widths", help="comma-separated annulus widths (reduced grid)")
    sp.add_argument("--boxes", help="x0,y0,x1,y1;... (grid-boxes)")
    sp.add_argument("--s", type=int, default=2)
    sp.add_argument("--q", type=int)
    sp.add_argument("--permissive", action="store_true")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_instance)

    sp = sub.add_parser("generators", help="sample S(b, delta) for an instance")
    sp.add_argument("--instance", required=True)
    sp.add_argument("--delta", type=float, default=0.5)
    sp.add_argument("--b", help="comma-separated b_l (default b_l = l)")
    sp.add_argument("--step-mode", choices=("uniform", "multiset"), default="uniform")
    sp.add_argument("--verify", action="store_true", help="run the surjectivity checks")
    sp.add_argument("--permissive", action="store_true")
    common(sp, fmt=False)
    sp.set_defaults(func=cmd_generators)

    sp = sub.add_parser("spectrum", help="Cayley graph spectrum by characters")
    sp.add_argument("--group", required=True, help='moduli, e.g. "3,3,3" or "3^3"')
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--gens", help='generators, e.g. "1,0,0;0,1,0"')
    g.add_argument("--random", type=int, help="number of uniform random generators")
    sp.add_argument("--loop", choices=("paper", "conventional"), default="paper")
    sp.add_argument("--delta", type=float)
    sp.add_argument("--convention", choices=("paper", "strict"), default="paper")
    common(sp)
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("density", help="target densities #Theta_l / n_l")
    sp.add_argument("--instance", required=True)
    sp.add_argument("--block", type=int)
    sp.add_argument("--mode", choices=("auto", "exact", "lower-bound"), default="auto")
    sp.add_argument("--cap", type=int, default=10**7)
    common(sp, seed=False)
    sp.set_defaults(func=cmd_density)

    sp = sub.add_parser("bound", help="sieve and theorem bounds")
    sp.add_argument("--kind", choices=("sieve", "coloring", "coloring-exp", "coloring-sqrt", "grid", "ap"), default="sieve")
    sp.add_argument("--k", default="1", help="comma-separated step counts")
    sp.add_argument("--eta", type=float)
    sp.add_argument("--generators")
    sp.add_argument("--instance")
    sp.add_argument("--eta-mode", choices=ETA_MODES + ("both",), default="proof-faithful")
    sp.add_argument("--delta", type=float)
    sp.add_argument("--p-identity", type=float)
    sp.add_argument("--p-min", type=float)
    sp.add_argument("--C0", type=float, default=1.0)
    sp.add_argument("--L1", type=float)
    sp.add_argument("--L2", type=float)
    sp.add_argument("--density", type=float)
    sp.add_argument("--log-group", type=float, help="natural log of |G_{L2}|")
    sp.add_argument("--c", type=int, default=3)
    sp.add_argument("--R", type=int, default=0)
    sp.add_argument("--s", type=int, default=2)
    sp.add_argument("--i", type=int, help="i(2 L1) for the coloring bound")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_bound)

    sp = sub.add_parser("walk", help="Monte Carlo walks with block detectors")
    sp.add_argument("--generators", required=True)
    sp.add_argument("--k", default="0,1,5,25")
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--start", default="zero", help='"zero", "theta-free", "random" or a serialized labeling')
    sp.add_argument("--aggregate", action="store_true")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--backend", choices=("cython", "python"))
    common(sp)
    sp.set_defaults(func=cmd_walk)

    sp = sub.add_parser("alon-roichman", help="random Cayley graph expansion trials")
    sp.add_argument("--group", required=True)
    sp.add_argument("--b", type=float, default=2.0)
    sp.add_argument("--delta", type=float, default=0.5)
    sp.add_argument("--trials", type=int, default=2000)
    sp.add_argument("--kappa", type=int)
    sp.add_argument("--convention", choices=("paper", "strict"), default="paper")
    sp.add_argument("--workers", type=int, default=1)
    common(sp)
    sp.set_defaults(func=cmd_alon_roichman)

    sp = sub.add_parser("experiment", help="run a sieve experiment from a JSON config")
    sp.add_argument("--config")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--trials", type=int)
    sp.add_argument("--k")
    sp.add_argument("--delta", type=float)
    sp.add_argument("--eta-mode", choices=ETA_MODES)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--backend", choices=("cython", "python"))
    sp.add_argument("--out")
    sp.add_argument("--format", choices=("csv", "json"))
    sp.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 2
    except CapacityError as exc:
        print(f"capacity exceeded: {exc}", file=sys.stderr)
        return 3
    except (WalkSieveError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
