"""Block quotients, generator sampling and the surjectivity checks.

A :class:`BlockSystem` fixes disjoint site blocks B_l of a ground set; the
quotient by the labelings vanishing on B_l is represented by labelings
supported in B_l, and has order c**|B_l|. A :class:`GeneratorSystem` holds
the sampled quotient generators, their canonical lifts and the symmetric
step set used by the walk.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import mpmath
import numpy as np

from . import rng
from .errors import CapacityError, InvariantViolation, NiceImageFailure, ParameterError, StructuralError
from .labeling import Block, GroundSet, Labeling, parse_site_token, site_token

log = logging.getLogger(__name__)

PAIR_CAP = 1 << 24
FORMAT_VERSION = 1


def check_delta(delta: float, strict: bool = True) -> None:
    upper = 0.5 if strict else 1.0
    if not (0.0 < delta <= upper) or (not strict and delta >= 1.0):
        rng_txt = "(0, 1/2]" if strict else "(0, 1)"
        raise ParameterError(f"delta={delta} outside {rng_txt}")


def kappa(n: int, b: float, delta: float, strict: bool = True) -> int:
    """Number of uniform generators making X(G/H, S) a delta-expander w.h.p.

    ``n`` is the quotient order (for abelian quotients the sum of the
    irreducible dimensions). Evaluated with 60 significant digits before
    taking the ceiling, so huge ``n`` such as 2**104 are exact enough.
    """
    check_delta(delta, strict)
    if n < 1:
        raise ParameterError(f"quotient order must be >= 1, got {n}")
    if not b > 0:
        raise ParameterError(f"b must be positive, got {b}")
    with mpmath.workdps(60):
        d = mpmath.mpf(delta)
        denom = (2 - d) * mpmath.log(2 - d) + d * mpmath.log(d)
        value = 2 / denom * (mpmath.log(mpmath.mpf(n)) + mpmath.mpf(b) + mpmath.log(2))
        return int(mpmath.ceil(value))


@dataclass(frozen=True, eq=False)
class BlockSystem:
    """Ground set, modulus and the blocks B_l indexed by l in [R].

    ``patterns[i]`` lists the site-index tuples whose configuration defines
    the target set of block ``blocks[i]``. ``pattern_mode`` is ``"equal"``
    (all residues equal), ``"equal-nonzero"`` or ``"present"`` (all
    residues nonzero).
    """

    ground: GroundSet
    modulus: int
    blocks: tuple[Block, ...]
    kind: str = "custom"
    params: dict = field(default_factory=dict)
    patterns: tuple = ()
    pattern_mode: str = "equal"

    def __post_init__(self):
        labels = [b.label for b in self.blocks]
        if len(set(labels)) != len(labels):
            raise StructuralError("block labels must be distinct")
        n = len(self.ground)
        for b in self.blocks:
            if b.sites and not (0 <= b.sites[0] and b.sites[-1] < n):
                raise StructuralError(f"block {b.label} has sites outside the ground set")
        if self.patterns and len(self.patterns) != len(self.blocks):
            raise StructuralError("one pattern list per block is required")
        object.__setattr__(self, "_pos", {b.label: i for i, b in enumerate(self.blocks)})

    @property
    def labels(self) -> tuple[int, ...]:
        return tuple(b.label for b in self.blocks)

    @property
    def R(self) -> int:
        return len(self.blocks)

    def position(self, label: int) -> int:
        try:
            return self._pos[label]
        except KeyError:
            raise StructuralError(f"no block with label {label}") from None

    def block(self, label: int) -> Block:
        return self.blocks[self.position(label)]

    def block_patterns(self, label: int) -> tuple:
        return self.patterns[self.position(label)] if self.patterns else ()

    def quotient_index(self, label: int) -> int:
        return self.modulus ** len(self.block(label))

    def log_quotient_index(self, label: int) -> float:
        return len(self.block(label)) * math.log(self.modulus)

    def is_disjoint(self) -> bool:
        seen: set[int] = set()
        for b in self.blocks:
            if seen.intersection(b.sites):
                return False
            seen.update(b.sites)
        return True

    def zero(self) -> Labeling:
        return Labeling.zero(self.ground, self.modulus)

    # serialization ----------------------------------------------------------

    def to_dict(self) -> dict:
        doc = {
            "format": "walksieve.block-system",
            "version": FORMAT_VERSION,
            "kind": self.kind,
            "params": self.params,
            "modulus": self.modulus,
            "ground": [site_token(s) for s in self.ground.sites],
            "blocks": [
                {"label": b.label, "sites": [site_token(self.ground.sites[i]) for i in b.sites]}
                for b in self.blocks
            ],
        }
        if self.kind == "custom" and self.patterns:
            tok = self.ground.sites
            doc["pattern_mode"] = self.pattern_mode
            doc["patterns"] = [[[site_token(tok[i]) for i in p] for p in ps] for ps in self.patterns]
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "BlockSystem":
        if doc.get("format") != "walksieve.block-system":
            raise StructuralError("not a block-system document")
        kind = doc.get("kind", "custom")
        if kind != "custom":
            from .instances import build_instance

            bs = build_instance(kind, **doc.get("params", {}))
            if "ground" in doc and [site_token(s) for s in bs.ground.sites] != doc["ground"]:
                raise StructuralError("stored ground set does not match the rebuilt instance")
            return bs
        ground = GroundSet(tuple(parse_site_token(t) for t in doc["ground"]))
        blocks = tuple(
            Block(b["label"], ground.indices_of(parse_site_token(t) for t in b["sites"]))
            for b in doc["blocks"]
        )
        patterns = tuple(
            tuple(ground.indices_of(parse_site_token(t) for t in p) for p in ps)
            for ps in doc.get("patterns", ())
        )
        return cls(
            ground,
            int(doc["modulus"]),
            blocks,
            kind="custom",
            params=doc.get("params", {}),
            patterns=patterns,
            pattern_mode=doc.get("pattern_mode", "equal"),
        )

    @classmethod
    def from_json(cls, text: str) -> "BlockSystem":
        return cls.from_dict(json.loads(text))


def custom_block_system(
    sites: Sequence,
    modulus: int,
    blocks: Sequence[Sequence],
    patterns: Sequence[Sequence[Sequence]] | None = None,
    pattern_mode: str = "equal",
) -> BlockSystem:
    """Block system over explicit sites; ``blocks[i]`` gets label ``i + 1``.

    ``patterns[i]``, if given, lists site tuples (by site, not index) whose
    configuration defines the targets of block ``i + 1``.
    """
    ground = GroundSet(tuple(sites))
    pats = ()
    if patterns is not None:
        pats = tuple(tuple(ground.indices_of(p) for p in ps) for ps in patterns)
    return BlockSystem(
        ground,
        modulus,
        tuple(Block(i + 1, ground.indices_of(b)) for i, b in enumerate(blocks)),
        patterns=pats,
        pattern_mode=pattern_mode,
    )


# sampling --------------------------------------------------------------------


def sample_generators(bs: BlockSystem, label: int, count: int, seed: int) -> list[Labeling]:
    """``count`` independent uniform elements of the quotient for block ``label``.

    Returned as canonical lifts (supported in the block). Draws come from the
    counter stream of ``(seed, label)``, so blocks can be sampled in any
    order or concurrently.
    """
    block = bs.block(label)
    width = len(block)
    if width == 0:
        return [bs.zero()] * count
    res = rng.residues(seed, rng.stream_id(rng.TAG_GENERATORS, label), count * width, bs.modulus)
    res = res.reshape(count, width)
    sites = block.sites
    return [
        Labeling(bs.ground, bs.modulus, {sites[j]: int(r) for j, r in enumerate(row) if r})
        for row in res
    ]


def _symmetrize(samples: Sequence[Labeling]) -> tuple[Labeling, ...]:
    out: dict[Labeling, None] = {}
    for s in samples:
        out.setdefault(s, None)
        out.setdefault(-s, None)
    return tuple(out)


@dataclass(frozen=True, eq=False)
class GeneratorSystem:
    """Sampled generators, the symmetric step set S and its distribution.

    ``samples[i]`` and ``block_sets[i]`` refer to ``block_system.blocks[i]``;
    ``elements`` is S with the identity first and ``probs`` the step
    probabilities in the same order.
    """

    block_system: BlockSystem
    delta: float
    b: tuple[float, ...]
    kappa: tuple[int, ...]
    samples: tuple[tuple[Labeling, ...], ...]
    block_sets: tuple[tuple[Labeling, ...], ...]
    elements: tuple[Labeling, ...]
    probs: np.ndarray
    C0: float
    seed: int | None = None
    strict: bool = True
    step_mode: str = "uniform"

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64).copy()
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        if len(p) != len(self.elements):
            raise StructuralError("one probability per step element is required")

    @property
    def modulus(self) -> int:
        return self.block_system.modulus

    @property
    def size(self) -> int:
        return len(self.elements)

    def block_set(self, label: int) -> tuple[Labeling, ...]:
        return self.block_sets[self.block_system.position(label)]

    def prob_of(self, element: Labeling) -> float:
        for s, q in zip(self.elements, self.probs):
            if s == element:
                return float(q)
        return 0.0

    @property
    def p_identity(self) -> float:
        return self.prob_of(self.block_system.zero())

    @property
    def p_min(self) -> float:
        return float(self.probs.min())

    def step_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """CSR layout of S: ``(indptr, site indices, residues)``."""
        indptr = [0]
        idx: list[int] = []
        val: list[int] = []
        for s in self.elements:
            for i, r in s.items():
                idx.append(i)
                val.append(r)
            indptr.append(len(idx))
        return (
            np.asarray(indptr, dtype=np.int64),
            np.asarray(idx, dtype=np.int32),
            np.asarray(val, dtype=np.uint8),
        )

    def check_invariants(self, single_block_support: bool = True) -> None:
        zero = self.block_system.zero()
        if zero not in self.elements:
            raise InvariantViolation("identity missing from S")
        index = {s: i for i, s in enumerate(self.elements)}
        if len(index) != len(self.elements):
            raise InvariantViolation("S contains duplicates")
        for s, i in index.items():
            j = index.get(-s)
            if j is None:
                raise InvariantViolation(f"S is not symmetric: inverse of {s} missing")
            if abs(self.probs[i] - self.probs[j]) > 1e-15:
                raise InvariantViolation("step distribution is not symmetric")
        if abs(self.probs.sum() - 1.0) > 1e-12 or (self.probs <= 0).any():
            raise InvariantViolation("step distribution must be positive and sum to 1")
        if single_block_support:
            sets = [set(b.sites) for b in self.block_system.blocks]
            for s in self.elements:
                if s.is_zero():
                    continue
                sup = {i for i, _ in s.items()}
                if sum(1 for bs in sets if sup <= bs) != 1:
                    raise InvariantViolation(f"{s} is not supported in exactly one block")

    # serialization ----------------------------------------------------------

    def to_dict(self) -> dict:
        sites = self.block_system.ground.sites

        def enc(f: Labeling):
            return [[site_token(sites[i]), r] for i, r in f.items()]

        return {
            "format": "walksieve.generator-system",
            "version": FORMAT_VERSION,
            "block_system": self.block_system.to_dict(),
            "delta": self.delta,
            "b": list(self.b),
            "kappa": list(self.kappa),
            "seed": self.seed,
            "strict": self.strict,
            "step_mode": self.step_mode,
            "samples": {
                str(blk.label): [enc(f) for f in smp]
                for blk, smp in zip(self.block_system.blocks, self.samples)
            },
            "S": [enc(f) for f in self.elements],
            "p": [float(q) for q in self.probs],
            "C0": self.C0,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "GeneratorSystem":
        if doc.get("format") != "walksieve.generator-system":
            raise StructuralError("not a generator-system document")
        if doc.get("version") != FORMAT_VERSION:
            raise StructuralError(f"unsupported generator-system version {doc.get('version')}")
        bs = BlockSystem.from_dict(doc["block_system"])
        ground, c = bs.ground, bs.modulus

        def dec(pairs) -> Labeling:
            return Labeling(ground, c, {ground.indices_of([parse_site_token(t)])[0]: r for t, r in pairs})

        samples = tuple(tuple(dec(f) for f in doc["samples"][str(blk.label)]) for blk in bs.blocks)
        return cls(
            block_system=bs,
            delta=doc["delta"],
            b=tuple(doc["b"]),
            kappa=tuple(doc["kappa"]),
            samples=samples,
            block_sets=tuple(_symmetrize(s) for s in samples),
            elements=tuple(dec(f) for f in doc["S"]),
            probs=np.asarray(doc["p"], dtype=np.float64),
            C0=doc["C0"],
            seed=doc.get("seed"),
            strict=doc.get("strict", True),
            step_mode=doc.get("step_mode", "uniform"),
        )

    @classmethod
    def from_json(cls, text: str) -> "GeneratorSystem":
        return cls.from_dict(json.loads(text))


def _c0(block_sets: Sequence[Sequence[Labeling]]) -> float:
    sizes = [len(s) for s in block_sets]
    if len(sizes) < 2:
        return 1.0
    return max(a / b for a, b in ((x, y) for i, x in enumerate(sizes) for j, y in enumerate(sizes) if i != j))


def assemble(
    bs: BlockSystem,
    samples: Sequence[Sequence[Labeling]],
    step_mode: str = "uniform",
) -> tuple[tuple, tuple, np.ndarray, float]:
    """Symmetrize per-block samples, adjoin the identity, attach step weights."""
    zero = bs.zero()
    block_sets = tuple(_symmetrize(s) for s in samples)
    elements: dict[Labeling, float] = {zero: 0.0}
    for bset in block_sets:
        for s in bset:
            elements.setdefault(s, 0.0)
    if step_mode == "uniform":
        weights = np.ones(len(elements))
    elif step_mode == "multiset":
        elements[zero] += 1.0
        for smp in samples:
            for s in smp:
                elements[s] += 1.0
                elements[-s] += 1.0
        weights = np.asarray(list(elements.values()))
    else:
        raise ParameterError(f"unknown step mode {step_mode!r}")
    probs = weights / weights.sum()
    return block_sets, tuple(elements), probs, _c0(block_sets)


def build_generator_system(
    bs: BlockSystem,
    delta: float = 0.5,
    b: Sequence[float] | None = None,
    seed: int = 0,
    strict: bool = True,
    step_mode: str = "uniform",
    kappas: Sequence[int] | None = None,
) -> GeneratorSystem:
    """Sample kappa_l generators per block and assemble S(b, delta).

    ``b`` defaults to b_l = l. ``kappas`` overrides the generator counts
    (used for sanity inversions); by default they come from :func:`kappa`.
    """
    if not bs.blocks:
        raise StructuralError("block system has no blocks")
    check_delta(delta, strict)
    if b is None:
        b = tuple(float(blk.label) for blk in bs.blocks)
    b = tuple(float(x) for x in b)
    if len(b) != len(bs.blocks):
        raise ParameterError("one b value per block is required")
    if any(not x > 0 for x in b):
        raise ParameterError("b values must be positive")
    if kappas is None:
        kappas = tuple(
            kappa(bs.quotient_index(blk.label), bl, delta, strict) for blk, bl in zip(bs.blocks, b)
        )
    kappas = tuple(int(k) for k in kappas)
    samples = tuple(
        tuple(sample_generators(bs, blk.label, k, seed)) for blk, k in zip(bs.blocks, kappas)
    )
    block_sets, elements, probs, c0 = assemble(bs, samples, step_mode)
    return GeneratorSystem(
        block_system=bs,
        delta=float(delta),
        b=b,
        kappa=kappas,
        samples=samples,
        block_sets=block_sets,
        elements=elements,
        probs=probs,
        C0=c0,
        seed=seed,
        strict=strict,
        step_mode=step_mode,
    )


# surjectivity checks -------------------------------------------------------------


def _enumerate(width: int, c: int) -> np.ndarray:
    """All vectors of (Z/c)^width as rows, in mixed-radix (C) order."""
    if width == 0:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.indices((c,) * width, dtype=np.int64)
    return grids.reshape(width, -1).T


def verify_linear_disjointness(bs: BlockSystem, l1: int, l2: int, cap: int = PAIR_CAP) -> bool:
    """Exhaustively decide surjectivity of rho_l1 x rho_l2.

    The product map only depends on the coordinates in B_l1 u B_l2, so it is
    enough to push every labeling supported there through both projections
    and count distinct image pairs.
    """
    b1, b2 = bs.block(l1), bs.block(l2)
    c = bs.modulus
    target = c ** (len(b1) + len(b2))
    if target > cap:
        raise CapacityError(f"{target} quotient pairs exceed the enumeration cap {cap}")
    union = sorted(set(b1.sites) | set(b2.sites))
    pos = {s: i for i, s in enumerate(union)}
    vecs = _enumerate(len(union), c)
    cols = [pos[s] for s in b1.sites] + [pos[s] for s in b2.sites]
    radix = c ** np.arange(len(cols) - 1, -1, -1, dtype=np.int64)
    images = vecs[:, cols] @ radix if cols else np.zeros(len(vecs), dtype=np.int64)
    return len(np.unique(images)) == target


def verify_nice_lifting(gs: GeneratorSystem, label: int) -> bool:
    block = gs.block_system.block(label)
    projected = {s.restrict(block) for s in gs.elements}
    expected = set(gs.block_set(label)) | {gs.block_system.zero()}
    return projected == expected


def verify_nice_image(gs: GeneratorSystem, l1: int, l2: int) -> tuple[Labeling, Labeling]:
    """Check the cross-shaped inclusion with the identity witness.

    Returns ``(identity, identity)``; raises :class:`NiceImageFailure`
    carrying the first missing pair otherwise.
    """
    if l1 == l2:
        raise ParameterError("nice image needs two distinct blocks")
    bs = gs.block_system
    b1, b2 = bs.block(l1), bs.block(l2)
    zero = bs.zero()
    x0 = y0 = zero
    # the identity is its own square in any group
    assert x0 + x0 == zero and y0 + y0 == zero
    image = {(s.restrict(b1), s.restrict(b2)) for s in gs.elements}
    left = {a for a, _ in image}
    right = {b for _, b in image}
    for a in sorted(left, key=lambda f: f.serialize()):
        if (a, y0) not in image:
            raise NiceImageFailure(f"({a.serialize()}, 0) missing from the image of S", (a, y0))
    for b in sorted(right, key=lambda f: f.serialize()):
        if (x0, b) not in image:
            raise NiceImageFailure(f"(0, {b.serialize()}) missing from the image of S", (x0, b))
    return x0, y0


def verify_all(gs: GeneratorSystem, cap: int = PAIR_CAP) -> dict:
    """Run the three surjectivity checks over all labels and pairs."""
    bs = gs.block_system
    labels = bs.labels
    lifting = {l: verify_nice_lifting(gs, l) for l in labels}
    disjoint = {}
    image = {}
    for l1, l2 in combinations(labels, 2):
        try:
            disjoint[(l1, l2)] = verify_linear_disjointness(bs, l1, l2, cap)
        except CapacityError:
            # disjoint blocks give surjectivity constructively
            ok = not set(bs.block(l1).sites) & set(bs.block(l2).sites)
            log.info("pair (%d, %d) above cap; trusting disjointness=%s", l1, l2, ok)
            disjoint[(l1, l2)] = ok
        try:
            verify_nice_image(gs, l1, l2)
            image[(l1, l2)] = True
        except NiceImageFailure:
            image[(l1, l2)] = False
    return {"linear_disjointness": disjoint, "nice_lifting": lifting, "nice_image": image}
