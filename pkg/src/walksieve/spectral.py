"""Exact spectra of Cayley graphs on finite abelian groups.

Characters of G = Z/n_1 x ... x Z/n_r are indexed by frequency vectors a,
chi_a(g) = exp(2 pi i sum_j a_j g_j / n_j), and diagonalize every Cayley
adjacency operator. The eigenvalue of chi_a is the Fourier transform of the
edge-weight function at a, so the whole spectrum is one ``fftn``.

Loops (the identity in S) follow the bookkeeping under which adding the
identity maps every eigenvalue lambda to lambda + (1 - 2 lambda)/(2 + |S*|):
a loop adds 2 to the degree and contributes chi(1) = 1 once. Pass
``loop="conventional"`` to count it twice instead.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import CapacityError, ParameterError, StructuralError
from . import kernels

CHARACTER_CAP = 1 << 24
MATRIX_CAP = 4096
EXPANSION_CAP = 20
_EXACT_TOL = 1e-9


@dataclass(frozen=True)
class AbelianGroup:
    """Z/n_1 x ... x Z/n_r with elements as integer vectors."""

    moduli: tuple[int, ...]

    def __post_init__(self):
        mods = tuple(int(m) for m in self.moduli)
        if any(m < 1 for m in mods):
            raise StructuralError("moduli must be positive")
        object.__setattr__(self, "moduli", mods)

    @classmethod
    def elementary(cls, c: int, rank: int) -> "AbelianGroup":
        return cls((c,) * rank)

    @property
    def rank(self) -> int:
        return len(self.moduli)

    @property
    def order(self) -> int:
        return math.prod(self.moduli)

    def normalize(self, elems) -> np.ndarray:
        arr = np.asarray(elems, dtype=np.int64)
        if arr.ndim == 1:
            arr = arr.reshape(-1, self.rank) if self.rank else arr.reshape(-1, 0)
        if arr.shape[1] != self.rank:
            raise StructuralError(f"elements must have {self.rank} coordinates")
        return np.mod(arr, np.asarray(self.moduli, dtype=np.int64)) if self.rank else arr

    def flat_index(self, elems) -> np.ndarray:
        arr = self.normalize(elems)
        if self.rank == 0:
            return np.zeros(len(arr), dtype=np.int64)
        return np.ravel_multi_index(tuple(arr.T), self.moduli)

    def unflatten(self, index) -> np.ndarray:
        if self.rank == 0:
            return np.zeros((np.size(index), 0), dtype=np.int64)
        return np.stack(np.unravel_index(np.asarray(index), self.moduli), axis=-1)

    def elements(self) -> np.ndarray:
        return self.unflatten(np.arange(self.order))

    def negate(self, elems) -> np.ndarray:
        return self.normalize(-self.normalize(elems))

    def is_involution(self, elem) -> bool:
        e = self.normalize(elem)
        return bool((self.normalize(2 * e) == 0).all())

    def product(self, other: "AbelianGroup") -> "AbelianGroup":
        return AbelianGroup(self.moduli + other.moduli)


@dataclass(frozen=True)
class Character:
    """chi(f) = exp(2 pi i sum_e a_e f(e) / c) on labelings."""

    modulus: int
    frequencies: dict

    def __call__(self, f) -> complex:
        c = self.modulus
        total = sum(a * f.value_at(site) for site, a in self.frequencies.items())
        return complex(np.exp(2j * np.pi * (total % c) / c))

    def is_trivial(self) -> bool:
        return all(a % self.modulus == 0 for a in self.frequencies.values())


@dataclass(frozen=True)
class SpectrumReport:
    """Eigenvalues indexed by character id (mixed-radix frequency index).

    ``paper_gap`` excludes eigenvalue -1 (bipartite end) and ``strict_gap``
    does not; both are forced to 0 when the graph is disconnected.
    """

    group: AbelianGroup
    eigenvalues: np.ndarray
    degree: float
    trivial_eigenvalue: float
    paper_gap: float
    strict_gap: float
    bipartite: bool
    connected: bool
    symmetric_size: int

    def character(self, char_id: int) -> np.ndarray:
        return self.group.unflatten(char_id)

    def nontrivial(self) -> np.ndarray:
        return self.eigenvalues[1:]

    def second_eigenvalue(self) -> float:
        """Largest signed eigenvalue over nontrivial characters."""
        nt = self.nontrivial()
        return float(nt.max()) if len(nt) else -math.inf

    def rows(self) -> Iterable[tuple[int, float, float]]:
        for i, lam in enumerate(self.eigenvalues):
            yield i, float(lam), float(abs(lam))


def symmetric_set(group: AbelianGroup, S) -> np.ndarray:
    """S u S^-1 as a deduplicated array of flat indices (set semantics)."""
    arr = group.normalize(S)
    if len(arr) == 0:
        return np.zeros(0, dtype=np.int64)
    idx = np.concatenate([group.flat_index(arr), group.flat_index(group.negate(arr))])
    return np.unique(idx)


def _weights(group: AbelianGroup, sym: np.ndarray, loop: str) -> tuple[np.ndarray, np.ndarray, float]:
    """Numerator weights, degree weights and total degree of the operator."""
    if loop not in ("paper", "conventional"):
        raise ParameterError(f"unknown loop convention {loop!r}")
    num = np.zeros(group.order, dtype=np.float64)
    num[sym] = 1.0
    degree = float(len(sym))
    if len(sym) and sym[0] == 0:
        degree += 1.0
        if loop == "conventional":
            num[0] = 2.0
    return num, sym, degree


def cayley_spectrum(group: AbelianGroup, S, loop: str = "paper", cap: int = CHARACTER_CAP) -> SpectrumReport:
    """Eigenvalues of the normalized adjacency operator of X(G, S)."""
    if group.order > cap:
        raise CapacityError(f"group order {group.order} exceeds the character cap {cap}")
    sym = symmetric_set(group, S)
    if len(sym) == 0:
        raise StructuralError("empty generator set")
    num, sym, degree = _weights(group, sym, loop)
    if group.rank:
        sums = np.fft.fftn(num.reshape(group.moduli)).real.ravel()
    else:
        sums = num.copy()
    eig = sums / degree
    top = sums[0]
    nontrivial = sums[1:]
    connected = not bool((np.abs(nontrivial - top) <= _EXACT_TOL).any())
    minus_one = np.abs(nontrivial + top) <= _EXACT_TOL
    bipartite = bool(minus_one.any())
    abs_nt = np.abs(eig[1:])
    if not connected:
        paper_gap = strict_gap = 0.0
    elif len(abs_nt) == 0:
        paper_gap = strict_gap = 1.0
    else:
        strict_gap = 1.0 - float(abs_nt.max())
        kept = abs_nt[~minus_one]
        paper_gap = 1.0 - (float(kept.max()) if len(kept) else 0.0)
    return SpectrumReport(
        group=group,
        eigenvalues=eig,
        degree=degree,
        trivial_eigenvalue=float(eig[0]),
        paper_gap=paper_gap,
        strict_gap=strict_gap,
        bipartite=bipartite,
        connected=connected,
        symmetric_size=len(sym),
    )


def is_delta_expander(report: SpectrumReport, delta: float, convention: str = "paper") -> bool:
    if not 0 < delta <= 0.5:
        raise ParameterError(f"delta={delta} outside (0, 1/2]")
    gap = report.paper_gap if convention == "paper" else report.strict_gap
    return gap >= delta - 1e-12


def matrix_spectrum_oracle(group: AbelianGroup, S, loop: str = "paper") -> np.ndarray:
    """Sorted eigenvalues of the dense normalized adjacency matrix."""
    n = group.order
    if n > MATRIX_CAP:
        raise CapacityError(f"group order {n} exceeds the matrix cap {MATRIX_CAP}")
    sym = symmetric_set(group, S)
    if len(sym) == 0:
        raise StructuralError("empty generator set")
    num, sym, degree = _weights(group, sym, loop)
    elems = group.elements()
    A = np.zeros((n, n))
    rows = np.arange(n)
    for s in sym:
        cols = group.flat_index(elems + group.unflatten(s))
        A[rows, cols] += num[s]
    return np.sort(np.linalg.eigvalsh(A / degree))


def closure_generates(group: AbelianGroup, S) -> bool:
    """Breadth-first closure check: does S generate the group."""
    sym = symmetric_set(group, S)
    steps = group.unflatten(sym)
    seen = np.zeros(group.order, dtype=bool)
    seen[0] = True
    frontier = np.array([0])
    while len(frontier):
        pts = group.unflatten(frontier)
        nxt = group.flat_index((pts[:, None, :] + steps[None, :, :]).reshape(-1, group.rank))
        nxt = np.unique(nxt)
        nxt = nxt[~seen[nxt]]
        seen[nxt] = True
        frontier = nxt
    return bool(seen.all())


# product construction ------------------------------------------------------------


@dataclass(frozen=True)
class ProductCheck:
    group: AbelianGroup
    edges: np.ndarray
    gamma: float
    delta: float
    guarantee: float
    gap: float
    strict_gap: float

    @property
    def holds(self) -> bool:
        return self.gap >= self.guarantee - 1e-12


def product_cayley(G: AbelianGroup, S, H: AbelianGroup, T, witness) -> tuple[AbelianGroup, np.ndarray]:
    """G x H with edge set (S x {y0}) u ({x0} x T)."""
    x0, y0 = witness
    x0 = G.normalize(x0)[0] if G.rank else np.zeros(0, dtype=np.int64)
    y0 = H.normalize(y0)[0] if H.rank else np.zeros(0, dtype=np.int64)
    if G.rank and not G.is_involution(x0):
        raise ParameterError(f"x0={x0.tolist()} does not square to the identity")
    if H.rank and not H.is_involution(y0):
        raise ParameterError(f"y0={y0.tolist()} does not square to the identity")
    S = G.normalize(S)
    T = H.normalize(T)
    left = np.hstack([S, np.tile(y0, (len(S), 1))])
    right = np.hstack([np.tile(x0, (len(T), 1)), T])
    return G.product(H), np.vstack([left, right]).astype(np.int64)


def check_product(G: AbelianGroup, S, H: AbelianGroup, T, witness, loop: str = "paper") -> ProductCheck:
    """Compare the product graph's gap with (1 + gamma)^-1 * min factor gap."""
    PG, Y = product_cayley(G, S, H, T, witness)
    rs = cayley_spectrum(G, S, loop)
    rt = cayley_spectrum(H, T, loop)
    ss, st = rs.symmetric_size, rt.symmetric_size
    gamma = max(ss / st, st / ss)
    delta = min(rs.paper_gap, rt.paper_gap)
    rp = cayley_spectrum(PG, Y, loop)
    return ProductCheck(PG, Y, gamma, delta, delta / (1 + gamma), rp.paper_gap, rp.strict_gap)


# adding the identity ---------------------------------------------------------------


@dataclass(frozen=True)
class AddIdentityCheck:
    before: SpectrumReport
    after: SpectrumReport
    predicted: np.ndarray
    max_error: float

    def preserves(self, delta: float, convention: str = "paper") -> bool:
        """delta-expansion before implies delta-expansion after."""
        if not is_delta_expander(self.before, delta, convention):
            return True
        return is_delta_expander(self.after, delta, convention)


def add_identity(group: AbelianGroup, S, loop: str = "paper") -> AddIdentityCheck:
    """Spectra of X(G, S) and X(G, S u {1}) with the predicted relation."""
    arr = group.normalize(S)
    if (group.flat_index(arr) == 0).any():
        raise ParameterError("identity already in S; the relation is trivial")
    before = cayley_spectrum(group, arr, loop)
    after = cayley_spectrum(group, np.vstack([arr, np.zeros((1, group.rank), dtype=np.int64)]), loop)
    m = before.symmetric_size
    lam = before.eigenvalues
    predicted = lam + (1 - 2 * lam) / (2 + m)
    return AddIdentityCheck(before, after, predicted, float(np.abs(predicted - after.eigenvalues).max()))


# edge expansion ----------------------------------------------------------------------


def cayley_neighbors(group: AbelianGroup, S) -> list[list[int]]:
    """Neighbor lists of X(G, S) without loops."""
    sym = symmetric_set(group, S)
    sym = sym[sym != 0]
    elems = group.elements()
    steps = group.unflatten(sym)
    return [sorted(set(group.flat_index(elems[v] + steps).tolist())) for v in range(group.order)]


def edge_expansion(group: AbelianGroup, S, backend: str | None = None) -> Fraction:
    """Exact min over 1 <= |A| <= |V|/2 of |boundary(A)| / |A|."""
    n = group.order
    if n > EXPANSION_CAP:
        raise CapacityError(f"brute-force expansion limited to {EXPANSION_CAP} vertices, got {n}")
    if n < 2:
        raise ParameterError("edge expansion needs at least two vertices")
    nbrs = cayley_neighbors(group, S)
    masks = np.zeros(n, dtype=np.uint32)
    for v, ns in enumerate(nbrs):
        for u in ns:
            masks[v] |= np.uint32(1 << u)
    num, den = kernels.get(backend).min_edge_ratio(masks)
    return Fraction(int(num), int(den))


def random_generators(group: AbelianGroup, count: int, rng: np.random.Generator) -> np.ndarray:
    mods = np.asarray(group.moduli, dtype=np.int64)
    return (rng.integers(0, 1 << 30, size=(count, group.rank)) % mods).astype(np.int64)


def enumerate_involutions(group: AbelianGroup) -> np.ndarray:
    """All elements g with 2g = 0."""
    per_axis = [[0] + ([m // 2] if m % 2 == 0 else []) for m in group.moduli]
    return np.asarray(list(itertools.product(*per_axis)), dtype=np.int64).reshape(-1, group.rank)


def group_from_spec(spec: str | Sequence[int]) -> AbelianGroup:
    """``"3,3,3"`` or ``"3^3"`` or a sequence of moduli."""
    if isinstance(spec, str):
        spec = spec.strip()
        if "^" in spec:
            base, exp = spec.split("^")
            return AbelianGroup.elementary(int(base), int(exp))
        return AbelianGroup(tuple(int(x) for x in spec.split(",") if x))
    return AbelianGroup(tuple(spec))
