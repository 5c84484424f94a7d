"""The abelian group (Z/c)^X of labelings of a finite ground set.

A :class:`Labeling` is an immutable group element. Two storage layouts are
used behind the same interface:

* ``c == 2`` and a ground set of at most :data:`PACKED_SITE_LIMIT` sites:
  a Python ``int`` used as a bitset, so addition is a single XOR;
* otherwise a sorted tuple of ``(index, residue)`` pairs with no zeros.

Sites are opaque hashable identifiers (ints, pairs of ints, pairs of
points). Their text form is a *token*: integers joined by ``_`` inside a
point and points joined by ``~``, e.g. ``3~7`` for the edge (3, 7) and
``-1_2~0_2`` for the grid edge ((-1, 2), (0, 2)).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import StructuralError

PACKED_SITE_LIMIT = 1 << 16

Site = Hashable


def site_token(site: Site) -> str:
    if isinstance(site, (int, np.integer)):
        return str(int(site))
    parts = []
    for point in site:
        if isinstance(point, (int, np.integer)):
            parts.append(str(int(point)))
        else:
            parts.append("_".join(str(int(x)) for x in point))
    return "~".join(parts)


def parse_site_token(token: str) -> Site:
    token = token.strip()
    if "~" not in token and "_" not in token:
        return int(token)
    points = []
    for part in token.split("~"):
        coords = tuple(int(x) for x in part.split("_"))
        points.append(coords[0] if len(coords) == 1 else coords)
    return tuple(points)


@dataclass(frozen=True, eq=False)
class GroundSet:
    """An ordered finite set of sites with a stable site <-> index bijection."""

    sites: tuple
    index: Mapping[Site, int] = field(init=False, repr=False)

    def __post_init__(self):
        sites = tuple(self.sites)
        index = {s: i for i, s in enumerate(sites)}
        if len(index) != len(sites):
            raise StructuralError("ground set sites must be pairwise distinct")
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "index", index)

    def __len__(self) -> int:
        return len(self.sites)

    def __iter__(self) -> Iterator[Site]:
        return iter(self.sites)

    def __contains__(self, site) -> bool:
        return site in self.index

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        return isinstance(other, GroundSet) and self.sites == other.sites

    def __hash__(self) -> int:
        return hash(self.sites)

    def indices_of(self, sites: Iterable[Site]) -> tuple[int, ...]:
        try:
            return tuple(self.index[s] for s in sites)
        except KeyError as exc:
            raise StructuralError(f"site {exc.args[0]!r} is not in the ground set") from None


@dataclass(frozen=True)
class Block:
    """A distinguished subset of ground-set indices, labelled by ``label``."""

    label: int
    sites: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(sorted(int(i) for i in self.sites)))

    def __len__(self) -> int:
        return len(self.sites)

    @property
    def mask(self) -> int:
        m = 0
        for i in self.sites:
            m |= 1 << i
        return m


def _uses_bits(modulus: int, ground: GroundSet) -> bool:
    return modulus == 2 and len(ground) <= PACKED_SITE_LIMIT


class Labeling:
    """An element of (Z/c)^X in canonical form (absent sites mean 0)."""

    __slots__ = ("ground", "modulus", "_bits", "_items", "_hash")

    def __init__(self, ground: GroundSet, modulus: int, values: Mapping[int, int] | None = None):
        if modulus < 2:
            raise StructuralError(f"modulus must be >= 2, got {modulus}")
        self.ground = ground
        self.modulus = int(modulus)
        self._hash = None
        self._bits = None
        self._items = None
        n = len(ground)
        clean = {}
        for i, r in (values or {}).items():
            i = int(i)
            if not 0 <= i < n:
                raise StructuralError(f"site index {i} outside ground set of size {n}")
            r = int(r) % self.modulus
            if r:
                clean[i] = r
        if _uses_bits(self.modulus, ground):
            bits = 0
            for i in clean:
                bits |= 1 << i
            self._bits = bits
        else:
            self._items = tuple(sorted(clean.items()))

    # construction helpers -------------------------------------------------

    @classmethod
    def zero(cls, ground: GroundSet, modulus: int) -> "Labeling":
        return cls(ground, modulus)

    @classmethod
    def from_sites(cls, ground: GroundSet, modulus: int, values: Mapping[Site, int]) -> "Labeling":
        return cls(ground, modulus, {ground.index[s]: r for s, r in values.items()})

    @classmethod
    def from_array(cls, ground: GroundSet, modulus: int, residues: Sequence[int]) -> "Labeling":
        arr = np.asarray(residues)
        if arr.shape != (len(ground),):
            raise StructuralError("dense residue vector does not match the ground set")
        nz = np.flatnonzero(arr % modulus)
        return cls(ground, modulus, {int(i): int(arr[i]) for i in nz})

    @classmethod
    def _raw(cls, ground, modulus, bits=None, items=None) -> "Labeling":
        obj = cls.__new__(cls)
        obj.ground = ground
        obj.modulus = modulus
        obj._bits = bits
        obj._items = items
        obj._hash = None
        return obj

    # views ----------------------------------------------------------------

    def items(self) -> Iterator[tuple[int, int]]:
        """Yield ``(index, residue)`` for the support, in index order."""
        if self._bits is not None:
            bits = self._bits
            while bits:
                low = bits & -bits
                yield low.bit_length() - 1, 1
                bits ^= low
        else:
            yield from self._items

    def as_dict(self) -> dict[int, int]:
        return dict(self.items())

    def __getitem__(self, index: int) -> int:
        if self._bits is not None:
            return (self._bits >> index) & 1
        for i, r in self._items:
            if i == index:
                return r
        return 0

    def value_at(self, site: Site) -> int:
        return self[self.ground.index[site]]

    def to_array(self, dtype=np.uint8) -> np.ndarray:
        out = np.zeros(len(self.ground), dtype=dtype)
        for i, r in self.items():
            out[i] = r
        return out

    def support(self) -> frozenset:
        return frozenset(self.ground.sites[i] for i, _ in self.items())

    def is_zero(self) -> bool:
        return not self._bits if self._bits is not None else not self._items

    def __len__(self) -> int:
        if self._bits is not None:
            return self._bits.bit_count()
        return len(self._items)

    # group law --------------------------------------------------------------

    def _check(self, other: "Labeling") -> None:
        if not isinstance(other, Labeling):
            raise StructuralError(f"cannot combine a labeling with {type(other).__name__}")
        if self.modulus != other.modulus:
            raise StructuralError(f"modulus mismatch: {self.modulus} vs {other.modulus}")
        if self.ground != other.ground:
            raise StructuralError("labelings live on different ground sets")

    def __add__(self, other: "Labeling") -> "Labeling":
        self._check(other)
        if self._bits is not None:
            return Labeling._raw(self.ground, 2, bits=self._bits ^ other._bits)
        c = self.modulus
        acc = dict(self._items)
        for i, r in other._items:
            v = (acc.get(i, 0) + r) % c
            if v:
                acc[i] = v
            else:
                acc.pop(i, None)
        return Labeling._raw(self.ground, c, items=tuple(sorted(acc.items())))

    def __neg__(self) -> "Labeling":
        if self._bits is not None or self.modulus == 2:
            return self
        c = self.modulus
        return Labeling._raw(self.ground, c, items=tuple((i, c - r) for i, r in self._items))

    def __sub__(self, other: "Labeling") -> "Labeling":
        return self + (-other)

    def scale(self, n: int) -> "Labeling":
        """``n * f``, the n-fold sum."""
        c = self.modulus
        return Labeling(self.ground, c, {i: r * n for i, r in self.items()})

    def restrict(self, block: Block) -> "Labeling":
        """Canonical representative of the class modulo the block kernel."""
        if self._bits is not None:
            return Labeling._raw(self.ground, 2, bits=self._bits & block.mask)
        keep = set(block.sites)
        return Labeling._raw(
            self.ground, self.modulus, items=tuple(p for p in self._items if p[0] in keep)
        )

    # equality / hashing -----------------------------------------------------

    def _key(self):
        return self._bits if self._bits is not None else self._items

    def __eq__(self, other) -> bool:
        if not isinstance(other, Labeling):
            return NotImplemented
        return (
            self.modulus == other.modulus
            and self._key() == other._key()
            and self.ground == other.ground
        )

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.modulus, self._key()))
        return self._hash

    # text form ------------------------------------------------------------

    def serialize(self) -> str:
        body = ",".join(f"{site_token(self.ground.sites[i])}:{r}" for i, r in self.items())
        return f"c={self.modulus}; {body}"

    @classmethod
    def parse(cls, text: str, ground: GroundSet) -> "Labeling":
        head, _, body = text.partition(";")
        head = head.strip()
        if not head.startswith("c="):
            raise StructuralError(f"labeling text must start with 'c=<int>;': {text!r}")
        c = int(head[2:])
        values = {}
        body = body.strip()
        if body:
            for entry in body.split(","):
                tok, _, res = entry.rpartition(":")
                idx = ground.indices_of([parse_site_token(tok)])[0]
                if idx in values:
                    raise StructuralError(f"site {tok} listed twice")
                values[idx] = int(res)
        return cls(ground, c, values)

    def __repr__(self) -> str:
        return f"Labeling({self.serialize()!r})"


# functional aliases ----------------------------------------------------------


def add(f: Labeling, g: Labeling) -> Labeling:
    return f + g


def negate(f: Labeling) -> Labeling:
    return -f


def restrict(f: Labeling, block: Block) -> Labeling:
    return f.restrict(block)


def support(f: Labeling) -> frozenset:
    return f.support()
