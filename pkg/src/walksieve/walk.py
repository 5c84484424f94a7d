"""The random walk X_{k+1} = X_k + xi_{k+1} and its exact Fourier oracle.

Monte Carlo trials run in the kernel backends (compiled or numpy); trial
``i`` always uses the RNG stream ``(seed, i)``, so results do not depend on
how trials are split across threads. The oracle works on the product of
selected block quotients Q, where the walk's projection is a convolution
power of the projected step distribution and is diagonalized by characters.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from . import kernels, rng
from .blocks import BlockSystem, GeneratorSystem, _enumerate
from .errors import CapacityError, ParameterError, StructuralError
from .instances import MODE_CODES, pattern_arrays
from .labeling import Labeling
from .spectral import AbelianGroup, Character, cayley_spectrum, is_delta_expander

ORACLE_CAP = 1 << 20
_CHUNK = 8192


@dataclass(frozen=True)
class WalkConfig:
    """Step system, starting labeling g0 (default: identity), horizon and seed."""

    steps: GeneratorSystem
    start: Labeling | None = None
    horizon: int = 0
    seed: int = 0
    backend: str | None = None

    def __post_init__(self):
        if self.start is None:
            object.__setattr__(self, "start", self.steps.block_system.zero())
        bs = self.steps.block_system
        if self.start.ground != bs.ground or self.start.modulus != bs.modulus:
            raise StructuralError("starting labeling lives in a different group")
        if self.horizon < 0:
            raise ParameterError("horizon must be >= 0")

    @property
    def block_system(self) -> BlockSystem:
        return self.steps.block_system


# Monte Carlo -------------------------------------------------------------------------


def trial_keys(seed: int, trials: int, first: int = 0) -> np.ndarray:
    ids = (np.arange(first, first + trials, dtype=np.uint64) * np.uint64(rng.N_TAGS)) + np.uint64(rng.TAG_WALK)
    return rng.stream_keys(seed, ids)


@dataclass
class SimulationResult:
    checkpoints: tuple[int, ...]
    labels: tuple[int, ...]
    hits: np.ndarray  # (trials, checkpoints, groups) uint8
    states: np.ndarray | None = None
    include_instance: bool = False

    @property
    def trials(self) -> int:
        return self.hits.shape[0]

    def block_hits(self) -> np.ndarray:
        return self.hits[:, :, : len(self.labels)].astype(bool)

    def survived(self) -> np.ndarray:
        """(trials, checkpoints): no selected block is a target."""
        return ~self.block_hits().any(axis=2)

    def instance_clean(self) -> np.ndarray:
        """(trials, checkpoints): X_k contains no target anywhere."""
        if not self.include_instance:
            raise StructuralError("simulation ran without the instance-wide patterns")
        return self.hits[:, :, len(self.labels)] == 0


def simulate(
    cfg: WalkConfig,
    checkpoints: Sequence[int],
    trials: int,
    labels: Sequence[int] | None = None,
    include_instance: bool = False,
    record_states: bool = False,
    workers: int = 1,
    first_trial: int = 0,
) -> SimulationResult:
    """Run ``trials`` walks and evaluate block detectors at each checkpoint."""
    cps = [int(k) for k in checkpoints]
    if any(k < 0 for k in cps) or cps != sorted(cps):
        raise ParameterError("checkpoints must be nonnegative and sorted")
    bs = cfg.block_system
    labels = tuple(bs.labels if labels is None else labels)
    for l in labels:
        bs.position(l)
    pat_sites, pat_group, ngroups, mode = pattern_arrays(bs, labels, include_instance)
    indptr, idx, val = cfg.steps.step_arrays()
    cdf = np.cumsum(cfg.steps.probs)
    cdf[-1] = 1.0
    start = cfg.start.to_array(np.uint8)
    keys = trial_keys(cfg.seed, trials, first_trial)
    impl = kernels.get(cfg.backend)
    cp_arr = np.asarray(cps, dtype=np.int64)

    def run(lo: int, hi: int):
        return impl.simulate_walks(
            start, indptr, idx, val, cdf, bs.modulus, np.ascontiguousarray(keys[lo:hi]),
            cp_arr, pat_sites, pat_group, ngroups, mode, record_states,
        )

    bounds = [(lo, min(trials, lo + _CHUNK)) for lo in range(0, trials, _CHUNK)] or [(0, 0)]
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: run(*b), bounds))
    else:
        parts = [run(*b) for b in bounds]
    hits = np.concatenate([p[0] for p in parts], axis=0)
    states = np.concatenate([p[1] for p in parts], axis=0) if record_states else None
    return SimulationResult(tuple(cps), labels, hits, states, include_instance)


def walk(cfg: WalkConfig, k: int, trial: int = 0) -> Labeling:
    """X_k of trial ``trial``; deterministic in (seed, trial, k)."""
    if k < 0:
        raise ParameterError("k must be >= 0")
    res = simulate(cfg, [k], 1, labels=(), record_states=True, first_trial=trial)
    bs = cfg.block_system
    return Labeling.from_array(bs.ground, bs.modulus, res.states[0, 0])


def final_states(cfg: WalkConfig, k: int, trials: int, workers: int = 1) -> np.ndarray:
    res = simulate(cfg, [k], trials, labels=(), record_states=True, workers=workers)
    return res.states[:, 0, :]


# exact oracle ------------------------------------------------------------------------


def character_transform(gs: GeneratorSystem, chi: Character) -> complex:
    """M_chi = sum_s p_s chi(s)."""
    return complex(sum(p * chi(s) for s, p in zip(gs.elements, gs.probs)))


def exact_moment(cfg: WalkConfig, chi: Character, k: int) -> complex:
    """E chi(X_k) = chi(g0) M_chi^k."""
    if k < 0:
        raise ParameterError("k must be >= 0")
    return chi(cfg.start) * character_transform(cfg.steps, chi) ** k


def _quotient_coords(bs: BlockSystem, labels: Sequence[int]) -> list[int]:
    coords: list[int] = []
    for l in labels:
        coords.extend(bs.block(l).sites)
    return coords


def projected_step_weights(gs: GeneratorSystem, labels: Sequence[int], cap: int = ORACLE_CAP) -> tuple[np.ndarray, list[int]]:
    """Step distribution pushed to Q = prod_l G_l, as a dense array of shape (c,)*w."""
    bs = gs.block_system
    coords = _quotient_coords(bs, labels)
    c = bs.modulus
    size = c ** len(coords)
    if size > cap:
        raise CapacityError(f"|Q| = {size} exceeds the oracle cap {cap}")
    pos = {site: j for j, site in enumerate(coords)}
    w = np.zeros(size, dtype=np.float64)
    radix = c ** np.arange(len(coords) - 1, -1, -1, dtype=np.int64)
    for s, p in zip(gs.elements, gs.probs):
        flat = 0
        for i, r in s.items():
            j = pos.get(i)
            if j is not None:
                flat += int(r) * int(radix[j])
        w[flat] += p
    return w.reshape((c,) * len(coords)) if coords else w.reshape(()), coords


def step_transform_table(gs: GeneratorSystem, labels: Sequence[int], cap: int = ORACLE_CAP) -> np.ndarray:
    """M_chi for every character of Q (array indexed by frequency vectors).

    numpy's forward FFT uses exp(-2 pi i ...); the step distribution is
    symmetric, so the table is real and equals sum_s p_s chi(s).
    """
    w, _ = projected_step_weights(gs, labels, cap)
    if w.ndim == 0:
        return np.ones(())
    return np.fft.fftn(w).real


def exact_block_distribution(cfg: WalkConfig, labels: Sequence[int], k: int, cap: int = ORACLE_CAP) -> np.ndarray:
    """Pr(rho(X_k) = x) for x in Q, as an array of shape (c,)*sum|B_l|.

    Axes follow the blocks in ``labels`` order, sites ascending within each.
    """
    if k < 0:
        raise ParameterError("k must be >= 0")
    w, coords = projected_step_weights(cfg.steps, labels, cap)
    if w.ndim == 0:
        return np.ones(())
    start = np.zeros_like(w)
    start[tuple(cfg.start[i] for i in coords)] = 1.0
    M = np.fft.fftn(w)
    dist = np.fft.ifftn(np.fft.fftn(start) * M**k).real
    return dist


def target_mask(bs: BlockSystem, label: int, detector: Callable[[Labeling, int], bool] | None = None, cap: int = ORACLE_CAP) -> np.ndarray:
    """Boolean array over G_l (shape (c,)*|B_l|) marking Theta_l."""
    block = bs.block(label)
    c, w = bs.modulus, len(block)
    if c**w > cap:
        raise CapacityError(f"block {label} has {c ** w} classes, above the cap {cap}")
    vecs = _enumerate(w, c)
    if detector is None:
        from ._pykernels import _pattern_hits

        pats = bs.block_patterns(label)
        if not pats:
            return np.zeros((c,) * w, dtype=bool)
        local = {s: j for j, s in enumerate(block.sites)}
        pat = np.asarray([[local[i] for i in p] for p in pats], dtype=np.int64)
        mask = _pattern_hits(vecs.astype(np.uint8), pat, MODE_CODES[bs.pattern_mode]).any(axis=1)
    else:
        mask = np.asarray(
            [detector(Labeling(bs.ground, c, dict(zip(block.sites, map(int, v)))), label) for v in vecs],
            dtype=bool,
        )
    return mask.reshape((c,) * w)


def survival_from_distribution(dist: np.ndarray, masks: Sequence[np.ndarray]) -> float:
    """Mass of the states where no block lands in its target set."""
    out = np.asarray(dist).reshape(tuple(m.size for m in masks))
    for m in masks:
        out = np.tensordot((~m).ravel().astype(np.float64), out, axes=(0, 0))
    # FFT round-off can leave values a few ulps outside [0, 1]
    return min(1.0, max(0.0, float(out)))


def exact_survival_probability(
    cfg: WalkConfig,
    labels: Sequence[int],
    k: int | Sequence[int],
    detector: Callable[[Labeling, int], bool] | None = None,
    targets: dict[int, np.ndarray] | None = None,
    cap: int = ORACLE_CAP,
):
    """P(for all l in labels: rho_l(X_k) not in Theta_l).

    Theta_l defaults to the block patterns of the instance; pass
    ``detector`` (a predicate on block representatives) or explicit
    ``targets`` masks to override. ``k`` may be a list.
    """
    bs = cfg.block_system
    labels = tuple(labels)
    if targets is not None:
        masks = [np.asarray(targets[l], dtype=bool) for l in labels]
    else:
        masks = [target_mask(bs, l, detector, cap) for l in labels]
    ks = [k] if np.isscalar(k) else list(k)
    w, coords = projected_step_weights(cfg.steps, labels, cap)
    if w.ndim == 0:
        vals = [1.0 for _ in ks]
    else:
        start = np.zeros_like(w)
        start[tuple(cfg.start[i] for i in coords)] = 1.0
        M = np.fft.fftn(w)
        S0 = np.fft.fftn(start)
        vals = []
        for kk in ks:
            if kk < 0:
                raise ParameterError("k must be >= 0")
            dist = np.fft.ifftn(S0 * M**kk).real
            vals.append(survival_from_distribution(dist, masks))
    return vals[0] if np.isscalar(k) else vals


# decay check ---------------------------------------------------------------------------


@dataclass
class DecayReport:
    threshold: float
    max_abs: float
    characters: int
    violations: list = field(default_factory=list)
    expanders: dict = field(default_factory=dict)
    nu_minus: float = 0.0
    nu_plus: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.violations and all(self.expanders.values())


def block_group(bs: BlockSystem, label: int) -> AbelianGroup:
    return AbelianGroup.elementary(bs.modulus, len(bs.block(label)))


def block_generator_vectors(gs: GeneratorSystem, label: int) -> np.ndarray:
    bs = gs.block_system
    block = bs.block(label)
    return np.asarray([[s[i] for i in block.sites] for s in gs.block_set(label)], dtype=np.int64)


def block_expanders(gs: GeneratorSystem, delta: float | None = None, convention: str = "paper") -> dict[int, bool]:
    """Is X(G_l, S_l) a delta-expander, for every block?"""
    delta = gs.delta if delta is None else delta
    out = {}
    for l in gs.block_system.labels:
        rep = cayley_spectrum(block_group(gs.block_system, l), block_generator_vectors(gs, l))
        out[l] = is_delta_expander(rep, delta, convention)
    return out


def decay_check(gs: GeneratorSystem, delta: float | None = None, pairs: bool = True, cap: int = ORACLE_CAP) -> DecayReport:
    """|M_chi| <= 1 - min(nu-, nu+_proof) for nontrivial characters of G_l and G_{l,l'}.

    Pair characters with one trivial component reduce to block characters
    and are covered by the single-block pass; the pair pass enumerates every
    character of G_{l,l'} anyway.
    """
    from .bounds import compute_eta

    delta = gs.delta if delta is None else delta
    params = compute_eta(gs, delta, "proof-faithful")
    threshold = 1.0 - min(params.nu_minus, params.nu_plus)
    bs = gs.block_system
    groups: list[tuple[int, ...]] = [(l,) for l in bs.labels]
    if pairs:
        groups += list(combinations(bs.labels, 2))
    report = DecayReport(threshold, 0.0, 0, nu_minus=params.nu_minus, nu_plus=params.nu_plus)
    report.expanders = block_expanders(gs, delta)
    for g in groups:
        table = np.abs(step_transform_table(gs, g, cap)).ravel()
        nt = table[1:]
        report.characters += len(nt)
        if len(nt):
            report.max_abs = max(report.max_abs, float(nt.max()))
            for j in np.flatnonzero(nt > threshold + 1e-12):
                report.violations.append((g, int(j) + 1, float(nt[j])))
    return report
