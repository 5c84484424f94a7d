"""Experiment orchestration: Alon-Roichman trials and sieve experiments.

Results are deterministic functions of the configuration: every random draw
comes from a counter-based stream keyed by (seed, tag, index), so neither
the worker count nor the chunking of trials changes any output byte.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import binomtest, norm

from . import rng
from .blocks import BlockSystem, build_generator_system, kappa
from .bounds import ETA_MODES, compute_eta, sieve_bound, theorem_bound, window_ok
from .errors import CapacityError, ParameterError, StructuralError
from .instances import build_instance, densities
from .labeling import Labeling
from .spectral import CHARACTER_CAP, cayley_spectrum, group_from_spec, is_delta_expander
from .walk import ORACLE_CAP, WalkConfig, exact_survival_probability, simulate, target_mask

OUT_ENV = "WALKSIEVE_OUT"
CONFIDENCE = 0.99


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_ENV, "."))


def wilson_interval(successes: int, trials: int, confidence: float = CONFIDENCE) -> tuple[float, float]:
    if trials <= 0:
        return 0.0, 1.0
    z = float(norm.ppf(0.5 + confidence / 2))
    p = successes / trials
    denom = 1 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


# Alon-Roichman --------------------------------------------------------------------------


@dataclass
class AlonRoichmanReport:
    group: tuple[int, ...]
    order: int
    b: float
    delta: float
    kappa: int
    trials: int
    failures: int
    threshold: float  # e^{-b}
    p_value: float  # H1: failure rate > e^{-b}
    convention: str = "paper"

    @property
    def rate(self) -> float:
        return self.failures / self.trials if self.trials else 0.0

    @property
    def consistent(self) -> bool:
        """Rate at most e^{-b} and the one-sided test finds no excess."""
        return self.rate <= self.threshold and self.p_value > 0.99

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rate"] = self.rate
        d["consistent"] = self.consistent
        return d


def _sample_group_elements(moduli: Sequence[int], count: int, seed: int, trial: int) -> np.ndarray:
    rank = len(moduli)
    key = np.uint64(rng.stream_key(seed, rng.stream_id(rng.TAG_AR, trial)))
    u = rng.uniform_array(key, np.arange(count * rank, dtype=np.uint64)).reshape(count, rank)
    m = np.asarray(moduli, dtype=np.float64)
    return np.minimum(np.floor(u * m), m - 1).astype(np.int64)


def run_alon_roichman(
    group_spec,
    b: float,
    delta: float,
    trials: int,
    seed: int = 0,
    kappa_override: int | None = None,
    convention: str = "paper",
    workers: int = 1,
    cap: int = CHARACTER_CAP,
) -> AlonRoichmanReport:
    """Sample kappa(|G|, b, delta) uniform generators per trial and test delta-expansion."""
    group = group_from_spec(group_spec)
    if group.order > cap:
        raise CapacityError(f"group order {group.order} exceeds the spectral cap {cap}")
    k = kappa_override if kappa_override is not None else kappa(group.order, b, delta)

    def one(t: int) -> bool:
        S = _sample_group_elements(group.moduli, k, seed, t)
        return not is_delta_expander(cayley_spectrum(group, S), delta, convention)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            failed = list(pool.map(one, range(trials)))
    else:
        failed = [one(t) for t in range(trials)]
    failures = int(sum(failed))
    threshold = math.exp(-b)
    p_value = float(binomtest(failures, trials, threshold, alternative="greater").pvalue) if trials else 1.0
    return AlonRoichmanReport(group.moduli, group.order, b, delta, int(k), trials, failures, threshold, p_value, convention)


# experiment configuration -----------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Flat, JSON-serializable description of one sieve experiment.

    ``b_rule`` is ``"index"`` (b_l = l), a number (constant b) or a list.
    ``L1``/``L2`` default to the smallest/largest block label. ``start`` is
    ``"zero"``, ``"theta-free"`` or ``"random"``.
    """

    instance: dict = field(default_factory=lambda: {"kind": "coloring", "R": 3, "c": 3})
    delta: float = 0.5
    b_rule: object = "index"
    seed: int = 0
    ks: list = field(default_factory=lambda: [0, 1, 5, 25])
    trials: int = 1000
    L1: float | None = None
    L2: float | None = None
    eta_mode: str = "proof-faithful"
    start: str = "zero"
    step_mode: str = "uniform"
    workers: int = 1
    oracle: bool = True
    out: str | None = None
    format: str = "csv"
    backend: str | None = None

    def __post_init__(self):
        if self.eta_mode not in ETA_MODES:
            raise ParameterError(f"unknown eta mode {self.eta_mode!r}")
        if self.format not in ("csv", "json"):
            raise ParameterError(f"unknown format {self.format!r}")
        if self.trials < 0:
            raise ParameterError("trials must be >= 0")
        self.ks = sorted(int(k) for k in self.ks)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(doc) - known
        if extra:
            raise ParameterError(f"unknown config keys: {sorted(extra)}")
        return cls(**doc)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))


def resolve_b(rule, bs: BlockSystem) -> tuple[float, ...]:
    if rule == "index":
        return tuple(float(l) for l in bs.labels)
    if isinstance(rule, (int, float)):
        return tuple(float(rule) for _ in bs.labels)
    if isinstance(rule, (list, tuple)) and len(rule) == bs.R:
        return tuple(float(x) for x in rule)
    raise ParameterError(f"cannot interpret b rule {rule!r}")


def theta_free_start(bs: BlockSystem, labels: Sequence[int] | None = None) -> Labeling:
    """A labeling none of whose selected blocks is a target (zero if possible)."""
    labels = bs.labels if labels is None else labels
    values: dict[int, int] = {}
    for l in labels:
        if not bs.block_patterns(l):
            continue
        mask = target_mask(bs, l).ravel()
        if not mask[0]:
            continue
        free = np.flatnonzero(~mask)
        if len(free) == 0:
            raise StructuralError(f"every class of block {l} is a target")
        block = bs.block(l)
        digits = np.unravel_index(int(free[0]), (bs.modulus,) * len(block))
        values.update({s: int(d) for s, d in zip(block.sites, digits)})
    return Labeling(bs.ground, bs.modulus, values)


def random_start(bs: BlockSystem, seed: int) -> Labeling:
    vals = rng.residues(seed, rng.stream_id(rng.TAG_START, 0), len(bs.ground), bs.modulus)
    return Labeling.from_array(bs.ground, bs.modulus, vals)


def make_start(bs: BlockSystem, start: str, seed: int, labels=None) -> Labeling:
    if start == "zero":
        return bs.zero()
    if start == "theta-free":
        return theta_free_start(bs, labels)
    if start == "random":
        return random_start(bs, seed)
    return Labeling.parse(start, bs.ground)


# results ------------------------------------------------------------------------------------

COLUMNS = (
    "k", "trials", "freq", "ci_lo", "ci_hi", "exact",
    "bound_proof", "bound_stated", "vacuous", "window_ok", "instance_freq",
)


@dataclass(frozen=True)
class ResultRow:
    k: int
    trials: int
    freq: float
    ci_lo: float
    ci_hi: float
    exact: float | None
    bound_proof: float | None
    bound_stated: float | None
    vacuous: bool
    window_ok: bool
    instance_freq: float

    def cells(self) -> list[str]:
        return [_fmt(getattr(self, c)) for c in COLUMNS]

    @classmethod
    def from_cells(cls, cells: Sequence[str]) -> "ResultRow":
        d = dict(zip(COLUMNS, cells))
        return cls(
            k=int(d["k"]),
            trials=int(d["trials"]),
            freq=float(d["freq"]),
            ci_lo=float(d["ci_lo"]),
            ci_hi=float(d["ci_hi"]),
            exact=_opt_float(d["exact"]),
            bound_proof=_opt_float(d["bound_proof"]),
            bound_stated=_opt_float(d["bound_stated"]),
            vacuous=d["vacuous"] == "true",
            window_ok=d["window_ok"] == "true",
            instance_freq=float(d["instance_freq"]),
        )


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _opt_float(s: str) -> float | None:
    return None if s == "" else float(s)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list[ResultRow]
    labels: tuple[int, ...]
    eta: dict = field(default_factory=dict)
    oracle_available: bool = False
    theorem: dict = field(default_factory=dict)


def run_sieve_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Monte Carlo survival frequency vs exact oracle vs sieve bounds, per k."""
    spec = dict(cfg.instance)
    kind = spec.pop("kind")
    bs = build_instance(kind, **spec)
    gs = build_generator_system(bs, cfg.delta, resolve_b(cfg.b_rule, bs), seed=cfg.seed, step_mode=cfg.step_mode)
    L1 = cfg.L1 if cfg.L1 is not None else min(bs.labels)
    L2 = cfg.L2 if cfg.L2 is not None else max(bs.labels)
    labels = tuple(l for l in bs.labels if L1 <= l <= L2)
    if not labels:
        raise ParameterError(f"no block in the window [{L1}, {L2}]")
    start = make_start(bs, cfg.start, cfg.seed, labels)
    wcfg = WalkConfig(gs, start, max(cfg.ks, default=0), cfg.seed, cfg.backend)
    sim = simulate(wcfg, cfg.ks, cfg.trials, labels, include_instance=True, workers=cfg.workers)
    survived = sim.survived().sum(axis=0)
    clean = sim.instance_clean().sum(axis=0)

    exact = None
    if cfg.oracle:
        try:
            exact = exact_survival_probability(wcfg, labels, cfg.ks)
        except CapacityError:
            exact = None

    dens = {l: d for l, (d, _) in densities(bs, labels).items()}
    top = max(l for l in labels if l <= L2)
    log_g = bs.log_quotient_index(top)
    b_map = {blk.label: bl for blk, bl in zip(bs.blocks, gs.b)}
    w_ok = window_ok(L1, L2, bs.R)
    etas, reports = {}, {}
    for mode in ETA_MODES:
        try:
            etas[mode] = compute_eta(gs, cfg.delta, mode).eta
        except ParameterError:
            etas[mode] = None
    rows = []
    for j, k in enumerate(cfg.ks):
        vals = {}
        for mode in ETA_MODES:
            if etas[mode] is None:
                vals[mode] = None
                continue
            rep = sieve_bound(etas[mode], k, b_map, dens, log_g, L1, L2, mode, w_ok)
            vals[mode] = rep.raw
        lo, hi = wilson_interval(int(survived[j]), cfg.trials)
        proof = vals["proof-faithful"]
        rows.append(
            ResultRow(
                k=k,
                trials=cfg.trials,
                freq=float(survived[j]) / cfg.trials if cfg.trials else 0.0,
                ci_lo=lo,
                ci_hi=hi,
                exact=None if exact is None else float(exact[j]),
                bound_proof=proof,
                bound_stated=vals["as-stated"],
                vacuous=proof is None or not proof < 1.0,
                window_ok=w_ok,
                instance_freq=float(clean[j]) / cfg.trials if cfg.trials else 0.0,
            )
        )
    theorem = {}
    eta_main = etas.get(cfg.eta_mode)
    if eta_main is not None:
        for k in cfg.ks:
            tb = theorem_bound(bs, eta_main, k)
            theorem[k] = (tb.name, tb.value, tb.window_ok)
    return ExperimentResult(cfg, rows, labels, etas, exact is not None, theorem)


# emission -----------------------------------------------------------------------------------


def rows_to_csv(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()


def rows_to_json(rows: Sequence[ResultRow]) -> str:
    return json.dumps({"columns": list(COLUMNS), "rows": [r.cells() for r in rows]}, indent=1) + "\n"


def parse_rows(text: str, fmt: str) -> list[ResultRow]:
    if fmt == "csv":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if tuple(header) != COLUMNS:
            raise StructuralError(f"unexpected CSV header {header}")
        return [ResultRow.from_cells(r) for r in reader]
    if fmt == "json":
        doc = json.loads(text)
        if tuple(doc["columns"]) != COLUMNS:
            raise StructuralError("unexpected JSON columns")
        return [ResultRow.from_cells(r) for r in doc["rows"]]
    raise ParameterError(f"unknown format {fmt!r}")


def emit_results(rows: Sequence[ResultRow], fmt: str = "csv", path: str | os.PathLike | None = None) -> Path:
    """Write rows in a stable column order; returns the file path."""
    if fmt == "csv":
        payload = rows_to_csv(rows)
    elif fmt == "json":
        payload = rows_to_json(rows)
    else:
        raise ParameterError(f"unknown format {fmt!r}")
    if path is None:
        path = default_out_dir() / f"results.{fmt}"
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(payload, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path
