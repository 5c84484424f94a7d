"""The three labeling families and their target-pattern detectors.

* edge colorings of the complete graph on [t(R)], blocks = edges inside
  I_l, targets = monochromatic triangles;
* subgraphs of the grid Z^2 (c = 2), blocks = edges in square annuli,
  targets = 4-cycles, which in the grid are exactly unit squares;
* colorings of [t(R)], blocks I_l = {l + q j : 0 <= j < 2s}, targets =
  monochromatic s-term progressions inside I_l.

Every block carries its list of patterns (tuples of site indices); a block
labeling is a target iff one pattern is monochromatic (``"equal"``) or
fully present (``"present"``).
"""

from __future__ import annotations

import math
import warnings
from itertools import combinations
from typing import Sequence

import numpy as np

from ._pykernels import _pattern_hits
from .blocks import BlockSystem
from .errors import CapacityError, ParameterError, StructuralError
from .labeling import Block, GroundSet, Labeling

DENSITY_CAP = 10**7
MODE_CODES = {"equal": 0, "equal-nonzero": 1, "present": 2}


def _check_disjoint(sets: Sequence[Sequence], what: str) -> None:
    seen: dict = {}
    for l, items in enumerate(sets, start=1):
        for x in items:
            if x in seen:
                raise StructuralError(f"{what} {seen[x]} and {l} overlap at {x!r}")
            seen[x] = l


# colorings of the complete graph -------------------------------------------------


def coloring_partition(R: int, kind) -> list[list[int]]:
    if kind == "triples":
        return [[3 * l - 2, 3 * l - 1, 3 * l] for l in range(1, R + 1)]
    if kind == "triangular":
        return [list(range(l * (l + 1) // 2, l * (l + 1) // 2 + l + 1)) for l in range(1, R + 1)]
    if isinstance(kind, str):
        raise ParameterError(f"unknown partition kind {kind!r}")
    return [sorted(int(x) for x in part) for part in kind]


def make_coloring_instance(
    R: int,
    c: int,
    partition="triples",
    strict: bool = True,
    t: int | None = None,
    uncolored_zero: bool = False,
) -> BlockSystem:
    """Edge colorings of K_t with blocks E_l = edges inside I_l.

    ``t`` defaults to the smallest integer exceeding both 3R and every
    covered vertex. In strict mode R >= 3 and i(l) >= 3 are enforced; the
    permissive mode accepts smaller blocks and leaves them without targets.
    """
    if c < 2:
        raise ParameterError("need at least two colors")
    if c < 3:
        warnings.warn("the coloring results assume c >= 3", stacklevel=2)
    if R < 1 or (strict and R < 3):
        raise ParameterError(f"R={R} too small (strict mode needs R >= 3)")
    parts = coloring_partition(R, partition)
    if len(parts) != R:
        raise ParameterError(f"partition has {len(parts)} parts, expected R={R}")
    _check_disjoint(parts, "parts")
    if min(min(p) for p in parts if p) < 1:
        raise ParameterError("vertices are positive integers")
    small = [l for l, p in enumerate(parts, start=1) if len(p) < 3]
    if small and strict:
        raise ParameterError(f"blocks {small} have i(l) < 3")
    covered = max(max(p) for p in parts if p)
    t_min = max(covered, 3 * R + 1)
    if t is None:
        t = t_min
    elif t < covered or (strict and t <= 3 * R):
        raise ParameterError(f"t={t} must cover the partition and exceed 3R")
    edges = [(a, b) for a in range(1, t + 1) for b in range(a + 1, t + 1)]
    ground = GroundSet(tuple(edges))
    blocks = []
    patterns = []
    for l, part in enumerate(parts, start=1):
        blocks.append(Block(l, ground.indices_of(combinations(part, 2))))
        patterns.append(tuple(_triangle(ground, tri) for tri in combinations(part, 3)))
    params = {
        "R": R,
        "c": c,
        "partition": partition if isinstance(partition, str) else parts,
        "strict": strict,
        "t": t,
        "uncolored_zero": uncolored_zero,
    }
    return BlockSystem(
        ground,
        c,
        tuple(blocks),
        kind="coloring",
        params=params,
        patterns=tuple(patterns),
        pattern_mode="equal-nonzero" if uncolored_zero else "equal",
    )


def _triangle(ground: GroundSet, tri) -> tuple[int, int, int]:
    a, b, c = sorted(tri)
    return ground.indices_of([(a, b), (a, c), (b, c)])


# grid subgraphs ---------------------------------------------------------------------


def disc_edges(radius: int) -> list[tuple]:
    """Grid edges with all endpoint coordinates in [-radius, radius]."""
    out = []
    rng_ = range(-radius, radius + 1)
    for x in rng_:
        for y in rng_:
            if x < radius:
                out.append(((x, y), (x + 1, y)))
            if y < radius:
                out.append(((x, y), (x, y + 1)))
    return sorted(out)


def square_edges(x: int, y: int) -> tuple:
    """The four edges of the unit square with lower-left corner (x, y)."""
    return (
        ((x, y), (x + 1, y)),
        ((x, y), (x, y + 1)),
        ((x, y + 1), (x + 1, y + 1)),
        ((x + 1, y), (x + 1, y + 1)),
    )


def _squares_inside(ground: GroundSet, sites: set) -> tuple:
    pts = {p for i in sites for p in ground.sites[i]}
    out = []
    for x, y in sorted(pts):
        try:
            idx = ground.indices_of(square_edges(x, y))
        except StructuralError:
            continue
        if all(i in sites for i in idx):
            out.append(idx)
    return tuple(out)


def make_grid_instance(R: int, scale: str = "paper", widths: Sequence[int] | None = None) -> BlockSystem:
    """Subgraphs of the grid inside the disc of radius r_R, blocks = annuli.

    Paper scale: block l = E(D(0, 2l+2)) minus E(D(0, 2l)), 64l + 40 edges.
    Reduced scale: radii r_0 = 0 and r_l = r_{l-1} + widths[l-1].
    """
    if R < 1:
        raise ParameterError("R must be >= 1")
    if scale == "paper":
        radii = [2] + [2 * l + 2 for l in range(1, R + 1)]
    elif scale == "reduced":
        widths = list(widths) if widths is not None else [1] * R
        if len(widths) != R or any(w < 1 for w in widths):
            raise ParameterError("reduced scale needs R positive widths")
        radii = [0]
        for w in widths:
            radii.append(radii[-1] + int(w))
    else:
        raise ParameterError(f"unknown grid scale {scale!r}")
    ground = GroundSet(tuple(disc_edges(radii[-1])))
    blocks, patterns = [], []
    for l in range(1, R + 1):
        inner = set(disc_edges(radii[l - 1]))
        sites = [e for e in disc_edges(radii[l]) if e not in inner]
        idx = set(ground.indices_of(sites))
        squares = _squares_inside(ground, idx)
        if not squares:
            raise ParameterError(f"block {l} contains no unit square")
        blocks.append(Block(l, tuple(idx)))
        patterns.append(squares)
    params = {"R": R, "scale": scale}
    if scale == "reduced":
        params["widths"] = [int(w) for w in widths]
    return BlockSystem(
        ground, 2, tuple(blocks), kind="grid", params=params, patterns=tuple(patterns), pattern_mode="present"
    )


def make_grid_box_instance(boxes: Sequence[Sequence[int]]) -> BlockSystem:
    """Blocks = all grid edges inside axis-parallel boxes (x0, y0, x1, y1).

    A 1 x 1 box is a single unit square, which makes exact target densities
    easy to reason about.
    """
    block_edges = []
    for x0, y0, x1, y1 in boxes:
        if x1 <= x0 or y1 <= y0:
            raise ParameterError(f"degenerate box {(x0, y0, x1, y1)}")
        edges = []
        for x in range(x0, x1 + 1):
            for y in range(y0, y1 + 1):
                if x < x1:
                    edges.append(((x, y), (x + 1, y)))
                if y < y1:
                    edges.append(((x, y), (x, y + 1)))
        block_edges.append(sorted(edges))
    _check_disjoint(block_edges, "boxes")
    ground = GroundSet(tuple(sorted(e for b in block_edges for e in b)))
    blocks, patterns = [], []
    for l, edges in enumerate(block_edges, start=1):
        idx = set(ground.indices_of(edges))
        blocks.append(Block(l, tuple(idx)))
        patterns.append(_squares_inside(ground, idx))
    return BlockSystem(
        ground,
        2,
        tuple(blocks),
        kind="grid-boxes",
        params={"boxes": [list(map(int, b)) for b in boxes]},
        patterns=tuple(patterns),
        pattern_mode="present",
    )


# colorings of [t(R)] with progressions ------------------------------------------------


def progression_offsets(s: int) -> list[tuple[int, ...]]:
    """Index progressions of length s inside {0, ..., 2s-1}."""
    if s == 1:
        return [(a,) for a in range(2)]
    out = []
    for d in range(1, 2 * s):
        for a in range(2 * s):
            last = a + (s - 1) * d
            if last > 2 * s - 1:
                break
            out.append(tuple(a + k * d for k in range(s)))
    return out


def make_ap_instance(s: int, q: int, c: int, R: int, strict: bool = True) -> BlockSystem:
    """c-colorings of [R + q(2s-1)] with blocks I_l = {l + q j : 0 <= j < 2s}.

    Requires q >= R: for q < R the sets I_l overlap.
    """
    if s < 1:
        raise ParameterError("progression length s must be >= 1")
    if c < 2:
        raise ParameterError("need at least two colors")
    if c < 3:
        warnings.warn("the progression result assumes c >= 3", stacklevel=2)
    if strict and R <= s:
        raise ParameterError(f"R={R} must exceed s={s}")
    if q < R:
        l2 = 1 + q
        raise StructuralError(
            f"q={q} < R={R}: blocks overlap (e.g. I_1 and I_{l2} share {1 + q})"
        )
    t = R + q * (2 * s - 1)
    cells = list(range(1, t + 1))
    ground = GroundSet(tuple(cells))
    offsets = progression_offsets(s)
    blocks, patterns = [], []
    for l in range(1, R + 1):
        members = [l + q * j for j in range(2 * s)]
        blocks.append(Block(l, ground.indices_of(members)))
        patterns.append(tuple(ground.indices_of([members[j] for j in ap]) for ap in offsets))
    return BlockSystem(
        ground,
        c,
        tuple(blocks),
        kind="ap",
        params={"s": s, "q": q, "c": c, "R": R, "strict": strict},
        patterns=tuple(patterns),
        pattern_mode="equal",
    )


_BUILDERS = {
    "coloring": make_coloring_instance,
    "grid": make_grid_instance,
    "grid-boxes": make_grid_box_instance,
    "ap": make_ap_instance,
}


def build_instance(kind: str, **params) -> BlockSystem:
    try:
        builder = _BUILDERS[kind]
    except KeyError:
        raise ParameterError(f"unknown instance kind {kind!r}") from None
    return builder(**params)


# detection ------------------------------------------------------------------------------


def instance_patterns(bs: BlockSystem) -> tuple:
    """Patterns anywhere in the ground set (the 'contains no target' event)."""
    if bs.kind == "coloring":
        t = bs.params["t"]
        return tuple(_triangle(bs.ground, tri) for tri in combinations(range(1, t + 1), 3))
    if bs.kind in ("grid", "grid-boxes"):
        return _squares_inside(bs.ground, set(range(len(bs.ground))))
    return tuple(p for ps in bs.patterns for p in ps)


def _pattern_matches(values: Sequence[int], pattern, mode: str) -> bool:
    vals = [values[i] for i in pattern]
    if mode == "present":
        return all(vals)
    if mode == "equal-nonzero" and vals[0] == 0:
        return False
    return all(v == vals[0] for v in vals)


def detect(f: Labeling, bs: BlockSystem, label: int) -> bool:
    """Is the block class of ``f`` a target? Uses only the block restriction."""
    rep = f.restrict(bs.block(label))
    values = rep.as_dict()
    getter = _Sparse(values)
    return any(_pattern_matches(getter, p, bs.pattern_mode) for p in bs.block_patterns(label))


class _Sparse:
    __slots__ = ("d",)

    def __init__(self, d):
        self.d = d

    def __getitem__(self, i):
        return self.d.get(i, 0)


def _require(bs: BlockSystem, kinds) -> None:
    if bs.kind not in kinds:
        raise StructuralError(f"detector needs a {'/'.join(kinds)} instance, got {bs.kind}")


def detect_mono_triangle(f: Labeling, bs: BlockSystem, label: int) -> bool:
    _require(bs, ("coloring",))
    return detect(f, bs, label)


def detect_four_cycle(g: Labeling, bs: BlockSystem, label: int) -> bool:
    _require(bs, ("grid", "grid-boxes"))
    return detect(g, bs, label)


def detect_mono_ap(f: Labeling, bs: BlockSystem, label: int) -> bool:
    _require(bs, ("ap",))
    return detect(f, bs, label)


def contains_target(f: Labeling, bs: BlockSystem) -> bool:
    values = _Sparse(f.as_dict())
    return any(_pattern_matches(values, p, bs.pattern_mode) for p in instance_patterns(bs))


# densities --------------------------------------------------------------------------------


def density_lower_bound(bs: BlockSystem, label: int) -> float:
    """The closed-form lower bounds c^-2, 2^-4 and c^-s."""
    c = bs.modulus
    if bs.kind == "coloring":
        return c**-2.0 if bs.block_patterns(label) else 0.0
    if bs.kind in ("grid", "grid-boxes"):
        return 2.0**-4 if bs.block_patterns(label) else 0.0
    if bs.kind == "ap":
        return float(c) ** -bs.params["s"]
    raise StructuralError(f"no closed-form density for kind {bs.kind}")


def count_targets(bs: BlockSystem, label: int, cap: int = DENSITY_CAP, chunk: int = 1 << 18) -> int:
    """|Theta_l| by enumerating every labeling of the block."""
    block = bs.block(label)
    c, w = bs.modulus, len(block)
    total = c**w
    if total > cap:
        raise CapacityError(f"{total} block labelings exceed the enumeration cap {cap}")
    local = {s: j for j, s in enumerate(block.sites)}
    pats = bs.block_patterns(label)
    if not pats:
        return 0
    pat = np.asarray([[local[i] for i in p] for p in pats], dtype=np.int64)
    mode = MODE_CODES[bs.pattern_mode]
    powers = c ** np.arange(w - 1, -1, -1, dtype=np.int64)
    hits = 0
    for lo in range(0, total, chunk):
        idx = np.arange(lo, min(total, lo + chunk), dtype=np.int64)
        vals = ((idx[:, None] // powers[None, :]) % c).astype(np.uint8)
        hits += int(_pattern_hits(vals, pat, mode).any(axis=1).sum())
    return hits


def theta_density(bs: BlockSystem, label: int, mode: str = "exact", cap: int = DENSITY_CAP) -> float:
    if mode == "exact":
        return count_targets(bs, label, cap) / bs.quotient_index(label)
    if mode == "lower-bound":
        return density_lower_bound(bs, label)
    raise ParameterError(f"unknown density mode {mode!r}")


def densities(bs: BlockSystem, labels: Sequence[int] | None = None, cap: int = DENSITY_CAP) -> dict[int, tuple[float, str]]:
    """Exact density where enumerable, else the closed-form bound."""
    out = {}
    for l in labels if labels is not None else bs.labels:
        if bs.quotient_index(l) <= cap:
            out[l] = (theta_density(bs, l, "exact", cap), "exact")
        else:
            out[l] = (density_lower_bound(bs, l), "lower-bound")
    return out


def disc_edge_count(radius: int) -> int:
    return len(disc_edges(radius))


def annulus_edge_count(l: int) -> int:
    return disc_edge_count(2 * l + 2) - disc_edge_count(2 * l)


def pattern_arrays(bs: BlockSystem, labels: Sequence[int], include_instance: bool = False):
    """Padded pattern table for the kernels.

    Returns ``(sites, group, ngroups, mode_code)``; group ``i`` is
    ``labels[i]`` and, if requested, group ``len(labels)`` is the
    instance-wide pattern set.
    """
    rows, groups = [], []
    for g, l in enumerate(labels):
        for p in bs.block_patterns(l):
            rows.append(p)
            groups.append(g)
    ngroups = len(labels)
    if include_instance:
        for p in instance_patterns(bs):
            rows.append(p)
            groups.append(ngroups)
        ngroups += 1
    width = max((len(r) for r in rows), default=1)
    sites = np.full((len(rows), width), -1, dtype=np.int32)
    for i, r in enumerate(rows):
        sites[i, : len(r)] = r
    return sites, np.asarray(groups, dtype=np.int32), ngroups, MODE_CODES[bs.pattern_mode]


def log_group_order(bs: BlockSystem, label: int) -> float:
    return len(bs.block(label)) * math.log(bs.modulus)
