"""Decay constants and the sieve bounds, evaluated in log-space.

The bound

    sum_l e^{-b_l} + (1 + (L2 - L1) |G_{L2}|^{3/2} e^{-eta k}) / sum_l #Theta_l/n_l

involves |G_{L2}| as large as 2^2600, so every magnitude is carried as a
natural log and combined with log-sum-exp. Two readings of nu+ exist:

* ``"as-stated"``: nu+ = 2 delta / min_s p(s), as printed with the theorems;
* ``"proof-faithful"``: nu+ = p0+ delta / (1 + C0), what the spectral chain
  in the proof actually delivers (the default).

nu- = 2 p(1) in both modes and 1 - exp(-eta) = min(nu-, nu+).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .errors import ParameterError

ETA_MODES = ("proof-faithful", "as-stated")
_EXP_LIMIT = 700.0


def _check_mode(mode: str) -> None:
    if mode not in ETA_MODES:
        raise ParameterError(f"unknown eta mode {mode!r}; use one of {ETA_MODES}")


@dataclass(frozen=True)
class SieveParams:
    delta: float
    nu_minus: float
    nu_plus: float
    eta: float
    eta_mode: str
    C0: float = 1.0
    p_identity: float = 0.0
    p_min: float = 0.0
    b: Mapping[int, float] = field(default_factory=dict)
    L1: float | None = None
    L2: float | None = None

    def window(self, labels: Sequence[int]) -> tuple[int, ...]:
        """Lambda intersected with [L1, L2]."""
        if self.L1 is None or self.L2 is None:
            return tuple(labels)
        return tuple(l for l in labels if self.L1 <= l <= self.L2)

    def with_window(self, L1: float, L2: float, b: Mapping[int, float] | None = None) -> "SieveParams":
        if L1 > L2:
            raise ParameterError(f"L1={L1} > L2={L2}")
        return SieveParams(
            self.delta, self.nu_minus, self.nu_plus, self.eta, self.eta_mode, self.C0,
            self.p_identity, self.p_min, dict(self.b if b is None else b), L1, L2,
        )


def nu_constants(p_identity: float, p_min: float, delta: float, C0: float, mode: str) -> tuple[float, float]:
    _check_mode(mode)
    nu_minus = 2.0 * p_identity
    if mode == "as-stated":
        nu_plus = 2.0 * delta / p_min
    else:
        nu_plus = p_min * delta / (1.0 + C0)
    return nu_minus, nu_plus


def eta_from(nu_minus: float, nu_plus: float) -> float:
    """eta with 1 - exp(-eta) = min(nu-, nu+); no clamping.

    A constant at or above 1 means the stated rate is degenerate (nu- >= 1
    needs p(1) >= 1/2), and is rejected rather than clamped.
    """
    m = min(nu_minus, nu_plus)
    if nu_minus >= 1.0 or m >= 1.0:
        raise ParameterError(f"no valid eta: nu-={nu_minus:g}, nu+={nu_plus:g}")
    if m <= 0.0:
        raise ParameterError("no valid eta: the identity must carry positive mass")
    return -math.log1p(-m)


def eta_params(
    p_identity: float,
    p_min: float,
    delta: float,
    C0: float = 1.0,
    mode: str = "proof-faithful",
    b: Mapping[int, float] | None = None,
) -> SieveParams:
    nu_minus, nu_plus = nu_constants(p_identity, p_min, delta, C0, mode)
    return SieveParams(
        delta=delta,
        nu_minus=nu_minus,
        nu_plus=nu_plus,
        eta=eta_from(nu_minus, nu_plus),
        eta_mode=mode,
        C0=C0,
        p_identity=p_identity,
        p_min=p_min,
        b=dict(b or {}),
    )


def compute_eta(gs, delta: float | None = None, mode: str = "proof-faithful") -> SieveParams:
    """Constants for a :class:`~walksieve.blocks.GeneratorSystem`."""
    delta = gs.delta if delta is None else float(delta)
    if gs.p_identity <= 0:
        raise ParameterError("the identity must belong to S")
    b = {blk.label: bl for blk, bl in zip(gs.block_system.blocks, gs.b)}
    return eta_params(gs.p_identity, gs.p_min, delta, gs.C0, mode, b)


# the general bound ------------------------------------------------------------------


def _logsumexp(xs: Sequence[float]) -> float:
    xs = [x for x in xs if x != -math.inf]
    if not xs:
        return -math.inf
    m = max(xs)
    return m + math.log(sum(math.exp(x - m) for x in xs))


def format_log(logx: float, digits: int = 6) -> str:
    """Decimal scientific notation for exp(logx), valid far outside float range."""
    if logx == -math.inf:
        return "0"
    if logx == math.inf:
        return "inf"
    l10 = logx / math.log(10)
    e = math.floor(l10)
    m = 10 ** (l10 - e)
    if round(m, digits - 1) >= 10:
        m, e = m / 10, e + 1
    return f"{m:.{digits - 1}f}e{e:+d}"


def _exp(logx: float) -> float:
    return math.exp(logx) if logx < _EXP_LIMIT else math.inf


@dataclass(frozen=True)
class BoundReport:
    """Components of the sieve bound; ``log_*`` are natural logs."""

    k: int
    mode: str
    labels: tuple[int, ...]
    log_term_error: float  # log sum e^{-b_l}
    density_sum: float
    log_main_factor: float  # log(1 + (L2-L1)|G|^{3/2} e^{-eta k})
    log_term2: float  # log 1/density_sum
    log_term3: float  # log (L2-L1)|G|^{3/2} e^{-eta k} / density_sum
    log_raw: float
    window_ok: bool = True

    @property
    def term1(self) -> float:
        return _exp(self.log_term_error)

    @property
    def term2(self) -> float:
        return _exp(self.log_term2)

    @property
    def term3(self) -> float:
        return _exp(self.log_term3)

    @property
    def raw(self) -> float:
        return _exp(self.log_raw)

    @property
    def total(self) -> float:
        return min(1.0, self.raw)

    @property
    def vacuous(self) -> bool:
        return self.log_raw >= 0.0

    def formatted(self) -> dict[str, str]:
        return {
            "term1": format_log(self.log_term_error),
            "term2": format_log(self.log_term2),
            "term3": format_log(self.log_term3),
            "raw": format_log(self.log_raw),
        }


def sieve_bound(
    eta: float,
    k: int,
    b: Mapping[int, float],
    densities: Mapping[int, float],
    log_group_order: float,
    L1: float,
    L2: float,
    mode: str = "proof-faithful",
    window_ok: bool = True,
) -> BoundReport:
    """The general bound over Lambda_{L1,L2} = labels of ``densities`` inside [L1, L2].

    ``log_group_order`` is ln |G_{L2}|; ``b`` and ``densities`` map block
    labels to b_l and #Theta_l/n_l.
    """
    if L1 > L2:
        raise ParameterError(f"L1={L1} > L2={L2}")
    labels = tuple(sorted(l for l in densities if L1 <= l <= L2))
    if not labels:
        raise ParameterError("no block index lies in [L1, L2]")
    dens = [float(densities[l]) for l in labels]
    if any(d < 0 for d in dens):
        raise ParameterError("densities must be nonnegative")
    dsum = math.fsum(dens)
    if dsum <= 0:
        raise ParameterError("the density sum is zero")
    missing = [l for l in labels if l not in b]
    if missing:
        raise ParameterError(f"no b value for blocks {missing}")
    log_err = _logsumexp([-float(b[l]) for l in labels])
    width = L2 - L1
    if width > 0:
        log_tail = math.log(width) + 1.5 * log_group_order - eta * k
    else:
        log_tail = -math.inf
    log_main = float(np.logaddexp(0.0, log_tail))
    log_t2 = -math.log(dsum)
    log_t3 = log_tail + log_t2
    log_raw = _logsumexp([log_err, log_t2, log_t3])
    return BoundReport(
        k=int(k),
        mode=mode,
        labels=labels,
        log_term_error=log_err,
        density_sum=dsum,
        log_main_factor=log_main,
        log_term2=log_t2,
        log_term3=log_t3,
        log_raw=log_raw,
        window_ok=window_ok,
    )


def sieve_bound_for(params: SieveParams, k: int, densities: Mapping[int, float], log_group_order: float) -> BoundReport:
    if params.L1 is None or params.L2 is None:
        raise ParameterError("set the window (L1, L2) first")
    return sieve_bound(params.eta, k, params.b, densities, log_group_order, params.L1, params.L2, params.eta_mode)


def window_ok(L1: float, L2: float, R: int) -> bool:
    """Lambda = [R] meets [L1, L2] exactly in {ceil L1, ..., floor L2}, nonempty."""
    return L1 <= L2 and math.ceil(L1) >= 1 and math.floor(L2) <= R and math.ceil(L1) <= math.floor(L2)


# closed forms -----------------------------------------------------------------------


def coloring_exponent(i: int) -> Fraction:
    """(3/4) i (i-1) + 2."""
    return Fraction(3, 4) * i * (i - 1) + 2


def coloring_bound(c, L1, i2L1: int, eta, k, exp=None):
    """(c^2 + 1)/L1 + c^{(3/4) i(2L1)(i(2L1)-1) + 2} exp(-eta k).

    With ``exp`` given (e.g. ``sympy.exp``) the formula is built from the
    arguments as they are, which allows symbolic evaluation.
    """
    expo = coloring_exponent(i2L1)
    if exp is not None:
        return (c**2 + 1) / L1 + c**expo * exp(-eta * k)
    return (c**2 + 1) / L1 + _exp(float(expo) * math.log(c) - eta * k)


def coloring_window(L1: int, R: int) -> bool:
    return 1 <= L1 <= R // 2


def corollary1_L1(eta: float, k: int) -> int:
    return math.ceil(math.exp(eta * k))


def corollary1_bound(c, eta, k, exp=None):
    """(c^{13/2} + c^2 + 1) exp(-eta k)."""
    if exp is not None:
        return (c ** Fraction(13, 2) + c**2 + 1) * exp(-eta * k)
    return (c**6.5 + c**2 + 1) * math.exp(-eta * k)


def corollary1_window(eta: float, k: int, R: int) -> bool:
    return R > 0 and eta * k <= math.log(R / 2) - 1


def corollary2_L1(eta: float, k: int, c: int) -> int:
    return math.ceil(math.sqrt(eta * k / (64 * math.log(c))))


def corollary2_bound(c: int, eta: float, k: int) -> float:
    """8 (c^8 + c^2 + 1) sqrt(ln c) / sqrt(eta k)."""
    if eta * k <= 0:
        return math.inf
    return 8 * (c**8 + c**2 + 1) * math.sqrt(math.log(c)) / math.sqrt(eta * k)


def corollary2_window(eta: float, k: int, R: int, c: int) -> bool:
    return eta * k <= (4 * R - 4) ** 2 * math.log(c)


GRID_CHAIN = (150, 2**4 * 150, 1)


def grid_constant() -> int:
    """150 + 2^4 * 150 + 1, the numerator collected by the proof."""
    return sum(GRID_CHAIN)


def grid_L1(eta: float, k: int) -> int:
    return math.ceil(eta * k / 150)


def grid_bound(eta: float, k: int) -> float:
    """2551 / (eta k)."""
    if eta * k <= 0:
        return math.inf
    return grid_constant() / (eta * k)


def grid_window(eta: float, k: int, R: int) -> bool:
    return eta * k <= 75 * R - 149


def ap_bound(c: int, s: int, eta: float, k: int) -> float:
    """(c^{4s} + c^s + 1) exp(-eta k)."""
    return (c ** (4 * s) + c**s + 1) * math.exp(-eta * k)


def ap_window(eta: float, k: int, R: int, s: int | None = None) -> bool:
    ok = R > 0 and eta * k <= math.log(R / 2) - 1
    if s is not None:
        ok = ok and s >= 1
    return ok


# helper inequalities ------------------------------------------------------------------


def exp_gap_helper(x: float) -> float:
    """e^{1-x} - e^{-2x} - 1/x, which is <= 0 for x >= 1."""
    return math.exp(1 - x) - math.exp(-2 * x) - 1 / x


def corollary2_helper_holds(c: int, L1: int) -> bool:
    """L1 c^{3 L1^2 + 3 L1/2 + 2 - 64 (L1-1)^2} <= c^8, in exact integers.

    Squaring removes the half-integer exponent: L1^2 c^{2E} <= c^16.
    """
    two_e = 6 * L1 * L1 + 3 * L1 + 4 - 128 * (L1 - 1) ** 2
    lhs, rhs = L1 * L1, c**16
    if two_e >= 0:
        return lhs * c**two_e <= rhs
    return lhs <= rhs * c ** (-two_e)


def grid_helper(x: float) -> float:
    """log of 2^{192(x/150+1)+64} e^{-x} x, which is <= 0 for x >= 2551."""
    return (192 * (x / 150 + 1) + 64) * math.log(2) - x + math.log(x)


# theorem-level bounds on concrete instances ------------------------------------------------


@dataclass(frozen=True)
class TheoremBound:
    name: str
    value: float
    window_ok: bool
    L1: float | None = None
    L2: float | None = None

    @property
    def vacuous(self) -> bool:
        return not self.value < 1.0


def theorem_bound(bs, eta: float, k: int, L1: int | None = None) -> TheoremBound:
    """The closed-form bound matching ``bs.kind``, with the standard L1 choice."""
    R = bs.R
    if bs.kind == "coloring":
        c = bs.modulus
        part = bs.params.get("partition")
        if part == "triples":
            return TheoremBound("coloring-exp", corollary1_bound(c, eta, k), corollary1_window(eta, k, R))
        if part == "triangular":
            return TheoremBound("coloring-sqrt", corollary2_bound(c, eta, k), corollary2_window(eta, k, R, c))
        L1 = L1 if L1 is not None else max(1, R // 2)
        if not coloring_window(L1, R):
            return TheoremBound("coloring", math.inf, False, L1, 2 * L1)
        i2 = len(bs.block(2 * L1)) if 2 * L1 in bs.labels else 0
        i2 = int(round((1 + math.sqrt(1 + 8 * i2)) / 2)) if i2 else 0
        return TheoremBound("coloring", coloring_bound(c, L1, i2, eta, k), True, L1, 2 * L1)
    if bs.kind == "grid" and bs.params.get("scale") == "paper":
        return TheoremBound("grid", grid_bound(eta, k), grid_window(eta, k, R))
    if bs.kind == "ap":
        s = bs.params["s"]
        return TheoremBound("progression", ap_bound(bs.modulus, s, eta, k), ap_window(eta, k, R, s))
    return TheoremBound("none", math.inf, False)
