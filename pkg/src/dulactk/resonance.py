"""Continued fractions and the resonant support of an eigenvalue ratio.

The resonant support Res(a, lambda) collects the index pairs (n, m) with
m > 0, n >= a and |n*lambda + m| < 1/(2n): the monomials that carry the
dominant non-regular asymptotics of the model characteristics.  For a
negative rational ratio these are integer multiples of (q, p); for a negative
irrational they come from the continued-fraction convergents.  Both the
structured computation and a direct enumeration oracle are provided.
"""

from __future__ import annotations

import math
import sys
import warnings
from dataclasses import dataclass
from fractions import Fraction

from .errors import DomainError
from .series import EigenRatio

KIND_RATIONAL = "rational-resonant"
KIND_CONVERGENT = "convergent-quasi-resonant"

_FLOAT_CF_GUARD = 1e3 * sys.float_info.epsilon


@dataclass(frozen=True)
class Convergent:
    """Best rational approximation p/q from a continued fraction.

    The leading convergent of a number below one is 0/1, so p may be zero;
    q is always positive and gcd(p, q) == 1.
    """

    p: int
    q: int

    def __post_init__(self):
        if self.q < 1 or self.p < 0 or math.gcd(self.p, self.q) != 1:
            raise DomainError(f"invalid convergent {self.p}/{self.q}")


def convergents(alpha, q_max: int) -> list[Convergent]:
    """Continued-fraction convergents p_k/q_k of alpha > 0 with q_k <= q_max.

    Exact rational input (Fraction or int) terminates exactly at alpha.  For
    float input the expansion stops once the partial-quotient remainder drops
    below 1e3 machine epsilons relative to alpha, guarding against quotients
    made of float noise.
    """
    exact = isinstance(alpha, (Fraction, int))
    value = Fraction(alpha) if exact else float(alpha)
    if value <= 0:
        raise DomainError(f"alpha must be positive, got {alpha!r}")

    out: list[Convergent] = []
    p_prev, q_prev = 1, 0
    p_cur, q_cur = 0, 1
    x = value
    guard = None if exact else _FLOAT_CF_GUARD * max(1.0, float(value))
    while True:
        a_k = int(x) if exact else math.floor(x)
        p_next = a_k * p_cur + p_prev
        q_next = a_k * q_cur + q_prev
        if q_next > q_max:
            break
        out.append(Convergent(p_next, q_next))
        frac = x - a_k
        if exact:
            if frac == 0:
                break
            x = 1 / frac
        else:
            if frac <= guard:
                break
            x = 1.0 / frac
        p_prev, q_prev = p_cur, q_cur
        p_cur, q_cur = p_next, q_next
    return out


def nearest_rational(value: float, tol: float = 1e-12, q_max: int = 10_000):
    """(p, q) with |value - p/q| <= tol and q <= q_max, or None.

    Searches the convergents of value; used to warn when a float eigenvalue
    ratio sits suspiciously close to a low rational.
    """
    if value <= 0 or not math.isfinite(value):
        return None
    for conv in convergents(value, q_max):
        if conv.p > 0 and abs(value - conv.p / conv.q) <= tol:
            return conv.p, conv.q
    return None


@dataclass(frozen=True)
class ResonantSupport:
    pairs: tuple[tuple[int, int], ...]
    kinds: tuple[str, ...]
    a: int
    lam: EigenRatio
    n_max: int

    def __post_init__(self):
        prev = 0
        for (n, m) in self.pairs:
            if m <= 0 or n < self.a or n < prev:
                raise DomainError(f"support pair {(n, m)} violates the invariants")
            prev = n

    def to_json(self) -> list[dict]:
        return [
            {
                "n": n,
                "m": m,
                "kind": kind,
                "abs_n_lambda_plus_m": self.lam.abs_n_lambda_plus_m(n, m),
            }
            for (n, m), kind in zip(self.pairs, self.kinds)
        ]


def satisfies_criterion(lam: EigenRatio, n: int, m: int) -> bool:
    """The defining inequality |n*lambda + m| < 1/(2n), exact when tagged."""
    if n < 1:
        return False
    if lam.exact is not None:
        p, q = lam.exact
        return 2 * n * abs(m * q - n * p) < q
    return abs(n * lam.value + m) < 1.0 / (2 * n)


def _sorted_support(found: dict[tuple[int, int], str], a: int, lam: EigenRatio, n_max: int) -> ResonantSupport:
    pairs = tuple(sorted(found))
    kinds = tuple(found[k] for k in pairs)
    return ResonantSupport(pairs=pairs, kinds=kinds, a=a, lam=lam, n_max=n_max)


def resonant_support(a: int, lam: EigenRatio, n_max: int) -> ResonantSupport:
    """Structured computation of Res(a, lambda) from continued fractions.

    Empty unless lambda is a negative real.  Otherwise each admissible pair is
    a multiple j*(q_k, p_k) of a convergent of |lambda|; the defining
    inequality is re-checked per pair (exactly for tagged rationals), since
    early convergents and large multiples may fail it.
    """
    if a < 1 or n_max < a:
        raise DomainError("need a >= 1 and n_max >= a")
    if not lam.is_negative_real:
        return ResonantSupport((), (), a, lam, n_max)

    if lam.exact is not None:
        conv_list = convergents(Fraction(lam.exact[0], lam.exact[1]), n_max)
    else:
        value = -lam.value.real
        cand = nearest_rational(value)
        if cand is not None and abs(value - cand[0] / cand[1]) > 0.0:
            warnings.warn(
                f"float ratio {lam.value.real} is within 1e-12 of -{cand[0]}/{cand[1]}; "
                "consider tagging it exact (the support of a rational has infinitely "
                "many multiples that the float route will not see)",
                stacklevel=2,
            )
        conv_list = convergents(value, n_max)

    found: dict[tuple[int, int], str] = {}
    for conv in conv_list:
        for j in range(1, n_max // conv.q + 1):
            n, m = j * conv.q, j * conv.p
            if m < 1:
                break
            if not satisfies_criterion(lam, n, m):
                # the inequality degrades monotonically along multiples
                break
            if n >= a:
                exact_hit = lam.is_resonant(n, m)
                found[(n, m)] = KIND_RATIONAL if exact_hit else KIND_CONVERGENT
    return _sorted_support(found, a, lam, n_max)


def brute_force_support(a: int, lam: EigenRatio, n_max: int) -> ResonantSupport:
    """Direct enumeration oracle for Res(a, lambda).

    For each a <= n <= n_max all m in [1, ceil(n|lambda|) + 1] are tested;
    the m-range suffices since the criterion forces m within one of
    n|lambda|.
    """
    if a < 1 or n_max < a:
        raise DomainError("need a >= 1 and n_max >= a")
    if not lam.is_negative_real:
        return ResonantSupport((), (), a, lam, n_max)
    mod = abs(lam.value)
    found: dict[tuple[int, int], str] = {}
    for n in range(a, n_max + 1):
        for m in range(1, math.ceil(n * mod) + 2):
            if satisfies_criterion(lam, n, m):
                exact_hit = lam.is_resonant(n, m)
                found[(n, m)] = KIND_RATIONAL if exact_hit else KIND_CONVERGENT
    return _sorted_support(found, a, lam, n_max)
