"""Truncated bivariate power series and the prepared-field data model.

A series G(x, y) = sum G[n, m] x^n y^m is stored sparsely together with
rectangular truncation bounds (n_max, m_max); indices outside the stored
support are exactly zero.  Polydisc norms are coefficient-sum upper bounds
(Cauchy style): rigorous, at the price of some conservatism.

The module also houses the tagged eigenvalue ratio, the condition report for
the prepared field

    lambda * x d/dx + (1 + R(x, y)) * y d/dy,    R in x^a * C{x, y},

and the finite-order normal-form preparation that brings a general
non-degenerate jet into this shape times a unit.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING, Iterable, Mapping

from .errors import (
    DomainError,
    InternalConsistencyError,
    InvalidSupportError,
    PreconditionError,
    SupportRangeError,
    UnsupportedRatioError,
)

if TYPE_CHECKING:  # pragma: no cover
    from .resonance import ResonantSupport

Index = tuple[int, int]

#: Tolerance used when verifying the preparation residual.
PREPARE_RESIDUAL_RTOL = 1e-10


def require_finite(value: complex, what: str = "value") -> complex:
    value = complex(value)
    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise DomainError(f"{what} must be finite, got {value!r}")
    return value


# ---------------------------------------------------------------------------
# Eigenvalue ratio with optional exact-rational tag
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EigenRatio:
    """Ratio of the two eigenvalues, optionally tagged as exactly -p/q.

    Exact resonance decisions (n*lambda + m == 0) are made from the tag when
    present, never by float comparison: the resonant branch of the model
    characteristics is discontinuous there.
    """

    value: complex
    exact: tuple[int, int] | None = None  # (p, q), coprime positive: value == -p/q

    def __post_init__(self):
        require_finite(self.value, "eigenvalue ratio")
        if self.value == 0:
            raise DomainError("eigenvalue ratio must be nonzero")
        if self.exact is not None:
            p, q = self.exact
            if p <= 0 or q <= 0 or math.gcd(p, q) != 1:
                raise DomainError("exact tag must be coprime positive (p, q)")
            if abs(self.value - (-p / q)) > 1e-9 * max(1.0, abs(self.value)):
                raise DomainError("exact tag (p, q) contradicts the float value")

    @staticmethod
    def rational(p: int, q: int) -> "EigenRatio":
        """The negative rational ratio -p/q in lowest terms."""
        if p <= 0 or q <= 0:
            raise DomainError("rational tag needs positive p, q")
        g = math.gcd(p, q)
        p, q = p // g, q // g
        return EigenRatio(complex(-p / q, 0.0), (p, q))

    @property
    def is_negative_real(self) -> bool:
        if self.exact is not None:
            return True
        return self.value.imag == 0.0 and self.value.real < 0.0

    def inv_re(self) -> float:
        """Re(1/lambda), exact for tagged ratios."""
        if self.exact is not None:
            p, q = self.exact
            return -q / p
        v = self.value
        return v.real / (v.real * v.real + v.imag * v.imag)

    def is_resonant(self, n: int, m: int) -> bool:
        """Whether n*lambda + m == 0 exactly (tag-decided)."""
        if self.exact is None:
            return n == 0 and m == 0
        p, q = self.exact
        return n * p == m * q

    def abs_n_lambda_plus_m(self, n: int, m: int) -> float:
        if self.exact is not None:
            p, q = self.exact
            return abs(m * q - n * p) / q
        return abs(n * self.value + m)

    def condition_a(self, a: int) -> tuple[float, bool, bool]:
        """(value, holds, strict) for the inequality a + Re(1/lambda) >= 0.

        Strictness is decided exactly for tagged ratios; the equality case is
        what separates map/time computation from asymptotic verdicts.
        """
        if self.exact is not None:
            p, q = self.exact
            exact_val = Fraction(a) - Fraction(q, p)
            return float(exact_val), exact_val >= 0, exact_val > 0
        val = a + self.inv_re()
        return val, val >= 0.0, val > 0.0


# ---------------------------------------------------------------------------
# Truncated series
# ---------------------------------------------------------------------------

def _clean_terms(terms: Mapping[Index, complex]) -> dict[Index, complex]:
    out: dict[Index, complex] = {}
    for (n, m), c in terms.items():
        if not (isinstance(n, int) and isinstance(m, int)) or n < 0 or m < 0:
            raise DomainError(f"series index must be a pair of nonnegative ints, got {(n, m)!r}")
        c = require_finite(c, f"coefficient[{n},{m}]")
        if c != 0:
            out[(n, m)] = c
    return out


@dataclass(frozen=True)
class TruncatedSeries:
    coeffs: dict[Index, complex]
    n_max: int
    m_max: int

    def __post_init__(self):
        for (n, m) in self.coeffs:
            if n > self.n_max or m > self.m_max:
                raise DomainError(
                    f"index {(n, m)} exceeds truncation bounds ({self.n_max}, {self.m_max})"
                )

    # -- constructors ------------------------------------------------------

    @staticmethod
    def from_terms(
        terms: Mapping[Index, complex] | Iterable[tuple[int, int, complex]],
        n_max: int | None = None,
        m_max: int | None = None,
    ) -> "TruncatedSeries":
        if not isinstance(terms, Mapping):
            terms = {(n, m): c for (n, m, c) in terms}
        clean = _clean_terms(terms)
        if n_max is None:
            n_max = max((n for n, _ in clean), default=0)
        if m_max is None:
            m_max = max((m for _, m in clean), default=0)
        return TruncatedSeries(clean, n_max, m_max)

    @staticmethod
    def zero() -> "TruncatedSeries":
        return TruncatedSeries({}, 0, 0)

    @staticmethod
    def constant(c: complex) -> "TruncatedSeries":
        return TruncatedSeries.from_terms({(0, 0): c})

    @staticmethod
    def monomial(n: int, m: int, c: complex = 1.0) -> "TruncatedSeries":
        return TruncatedSeries.from_terms({(n, m): c})

    # -- basic queries -------------------------------------------------------

    def coefficient(self, n: int, m: int) -> complex:
        return self.coeffs.get((n, m), 0j)

    @property
    def support(self) -> tuple[Index, ...]:
        return tuple(sorted(self.coeffs))

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    def max_total_degree(self) -> int:
        return max((n + m for n, m in self.coeffs), default=0)

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        terms = dict(self.coeffs)
        for k, c in other.coeffs.items():
            terms[k] = terms.get(k, 0j) + c
        return TruncatedSeries(_clean_terms(terms), max(self.n_max, other.n_max), max(self.m_max, other.m_max))

    def __sub__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        return self + (-other)

    def __neg__(self) -> "TruncatedSeries":
        return TruncatedSeries({k: -c for k, c in self.coeffs.items()}, self.n_max, self.m_max)

    def scaled(self, factor: complex) -> "TruncatedSeries":
        factor = require_finite(factor, "scale factor")
        if factor == 0:
            return TruncatedSeries({}, self.n_max, self.m_max)
        return TruncatedSeries({k: factor * c for k, c in self.coeffs.items()}, self.n_max, self.m_max)

    def __mul__(self, other):
        if isinstance(other, TruncatedSeries):
            terms: dict[Index, complex] = {}
            for (n1, m1), c1 in self.coeffs.items():
                for (n2, m2), c2 in other.coeffs.items():
                    k = (n1 + n2, m1 + m2)
                    terms[k] = terms.get(k, 0j) + c1 * c2
            return TruncatedSeries(
                _clean_terms(terms), self.n_max + other.n_max, self.m_max + other.m_max
            )
        return self.scaled(other)

    def __rmul__(self, other):
        return self.scaled(other)

    def shifted(self, dn: int, dm: int) -> "TruncatedSeries":
        """Multiplication by the monomial x^dn y^dm (index shift)."""
        return TruncatedSeries(
            {(n + dn, m + dm): c for (n, m), c in self.coeffs.items()},
            self.n_max + dn,
            self.m_max + dm,
        )

    def truncate(self, n_max: int, m_max: int) -> "TruncatedSeries":
        terms = {k: c for k, c in self.coeffs.items() if k[0] <= n_max and k[1] <= m_max}
        return TruncatedSeries(terms, n_max, m_max)

    def truncate_total(self, deg: int) -> "TruncatedSeries":
        terms = {k: c for k, c in self.coeffs.items() if k[0] + k[1] <= deg}
        return TruncatedSeries(terms, min(self.n_max, deg), min(self.m_max, deg))

    # -- calculus ------------------------------------------------------------

    def diff_x(self) -> "TruncatedSeries":
        terms = {(n - 1, m): n * c for (n, m), c in self.coeffs.items() if n >= 1}
        return TruncatedSeries(terms, max(self.n_max - 1, 0), self.m_max)

    def diff_y(self) -> "TruncatedSeries":
        terms = {(n, m - 1): m * c for (n, m), c in self.coeffs.items() if m >= 1}
        return TruncatedSeries(terms, self.n_max, max(self.m_max - 1, 0))

    def regular_part(self) -> "TruncatedSeries":
        """The m == 0 rows, i.e. G(x, 0)."""
        terms = {k: c for k, c in self.coeffs.items() if k[1] == 0}
        return TruncatedSeries(terms, self.n_max, 0)

    # -- evaluation ----------------------------------------------------------

    def eval(self, x: complex, y: complex) -> complex:
        """Evaluate by Horner nesting: in y within each x-row, then in x."""
        require_finite(x, "x")
        require_finite(y, "y")
        if not self.coeffs:
            return 0j
        rows: dict[int, dict[int, complex]] = {}
        for (n, m), c in self.coeffs.items():
            rows.setdefault(n, {})[m] = c
        total = 0j
        for n in range(max(rows), -1, -1):
            total *= x
            row = rows.get(n)
            if row:
                inner = 0j
                for m in range(max(row), -1, -1):
                    inner = inner * y + row.get(m, 0j)
                total += inner
        return total

    def eval_log(self, z: complex, w: complex) -> complex:
        """Evaluate at (x, y) = (exp z, exp w) as sum c * exp(n z + m w).

        Combining the exponents avoids overflow of intermediate powers.
        """
        require_finite(z, "z")
        require_finite(w, "w")
        total = 0j
        for (n, m), c in self.coeffs.items():
            total += c * cmath.exp(n * z + m * w)
        return total

    # -- composition and reciprocal -------------------------------------------

    def compose(self, fx: "TruncatedSeries", fy: "TruncatedSeries", max_total: int) -> "TruncatedSeries":
        """Substitute x -> fx(x, y), y -> fy(x, y), truncated at total degree."""
        x_pows: list[TruncatedSeries] = [TruncatedSeries.constant(1.0)]
        y_pows: list[TruncatedSeries] = [TruncatedSeries.constant(1.0)]
        for n in range(1, max((k[0] for k in self.coeffs), default=0) + 1):
            x_pows.append((x_pows[-1] * fx).truncate_total(max_total))
        for m in range(1, max((k[1] for k in self.coeffs), default=0) + 1):
            y_pows.append((y_pows[-1] * fy).truncate_total(max_total))
        out = TruncatedSeries.zero()
        for (n, m), c in sorted(self.coeffs.items()):
            out = out + (x_pows[n] * y_pows[m]).truncate_total(max_total).scaled(c)
        return out.truncate_total(max_total)

    def reciprocal(self, n_max: int | None = None, m_max: int | None = None) -> "TruncatedSeries":
        """Series inverse 1/G under rectangular truncation; needs G(0,0) != 0."""
        c0 = self.coefficient(0, 0)
        if c0 == 0:
            raise PreconditionError("series has vanishing constant term; no reciprocal")
        n_max = self.n_max if n_max is None else n_max
        m_max = self.m_max if m_max is None else m_max
        v = (TruncatedSeries.constant(1.0) - self.scaled(1.0 / c0)).truncate(n_max, m_max)
        out = TruncatedSeries.constant(1.0)
        power = TruncatedSeries.constant(1.0)
        for _ in range(n_max + m_max + 1):
            power = (power * v).truncate(n_max, m_max)
            if power.is_zero:
                break
            out = out + power
        return out.scaled(1.0 / c0).truncate(n_max, m_max)

    def reciprocal_total(self, max_total: int) -> "TruncatedSeries":
        c0 = self.coefficient(0, 0)
        if c0 == 0:
            raise PreconditionError("series has vanishing constant term; no reciprocal")
        v = (TruncatedSeries.constant(1.0) - self.scaled(1.0 / c0)).truncate_total(max_total)
        out = TruncatedSeries.constant(1.0)
        power = TruncatedSeries.constant(1.0)
        for _ in range(max_total + 1):
            power = (power * v).truncate_total(max_total)
            if power.is_zero:
                break
            out = out + power
        return out.scaled(1.0 / c0).truncate_total(max_total)


# ---------------------------------------------------------------------------
# Polydisc, field spec, conditions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Polydisc:
    rho: float
    r: float

    def __post_init__(self):
        if not (self.rho > 0 and math.isfinite(self.rho)):
            raise DomainError("rho must be positive and finite")
        if not (self.r > 0 and math.isfinite(self.r)):
            raise DomainError("r must be positive and finite")

    @property
    def ln_rho(self) -> float:
        return math.log(self.rho)

    @property
    def ln_r(self) -> float:
        return math.log(self.r)


@dataclass(frozen=True)
class FieldSpec:
    """The prepared field lambda*x*d/dx + (1+R)*y*d/dy on a polydisc."""

    lam: EigenRatio
    a: int
    R: TruncatedSeries
    disc: Polydisc

    def __post_init__(self):
        if self.a < 1:
            raise DomainError("a must be a positive integer")
        bad = [k for k in self.R.coeffs if k[0] < self.a]
        if bad:
            raise InvalidSupportError(
                f"R must lie in x^{self.a} * C{{x,y}}; offending indices: {sorted(bad)}"
            )

    def r_norm(self) -> float:
        """Coefficient-sum bound for sup |R / x^a| on the polydisc."""
        return weighted_norm(self.R, self.disc, self.a)


@dataclass(frozen=True)
class ConditionReport:
    cond_x: bool
    cond_a: bool
    cond_a_strict: bool
    cond_r: bool
    a_plus_re_inv: float
    sup_abs_r_bound: float

    @property
    def all_hold(self) -> bool:
        return self.cond_x and self.cond_a and self.cond_r

    def to_json(self) -> dict:
        return {
            "cond_x": self.cond_x,
            "cond_a": self.cond_a,
            "cond_a_strict": self.cond_a_strict,
            "cond_r": self.cond_r,
            "a_plus_re_inv_lambda": self.a_plus_re_inv,
            "sup_abs_r_bound": self.sup_abs_r_bound,
            "all_hold": self.all_hold,
        }


def weighted_norm(g: TruncatedSeries, disc: Polydisc, a: int) -> float:
    """Upper bound sum |G[n,m]| rho^(n-a) r^m >= sup |G/x^a| on the polydisc."""
    total = 0.0
    for (n, m), c in g.coeffs.items():
        if n < a:
            raise InvalidSupportError(f"coefficient at {(n, m)} has n < a = {a}")
        total += abs(c) * disc.rho ** (n - a) * disc.r ** m
    return total


def dy_bound(g: TruncatedSeries, disc: Polydisc) -> float:
    """Upper bound sum m |G[n,m]| rho^n r^(m-1) >= sup |dG/dy| on the polydisc."""
    total = 0.0
    for (n, m), c in g.coeffs.items():
        if m >= 1:
            total += m * abs(c) * disc.rho ** n * disc.r ** (m - 1)
    return total


def split(
    g: TruncatedSeries, a: int, lam: EigenRatio, support: "ResonantSupport"
) -> tuple[TruncatedSeries, TruncatedSeries, TruncatedSeries]:
    """Coefficientwise partition of G into regular / resonant / remainder parts.

    The regular part keeps exactly the m == 0 coefficients, the resonant part
    the coefficients indexed in the given support, the remainder everything
    else.  The three supports are disjoint and union to the support of G.
    """
    if support.a != a:
        raise SupportRangeError(f"support computed for a = {support.a}, not a = {a}")
    if support.n_max < g.n_max:
        raise SupportRangeError(
            f"support covers n <= {support.n_max} but G has n_max = {g.n_max}"
        )
    res_set = set(support.pairs)
    g0: dict[Index, complex] = {}
    gres: dict[Index, complex] = {}
    grem: dict[Index, complex] = {}
    for k, c in g.coeffs.items():
        if k[1] == 0:
            g0[k] = c
        elif k in res_set:
            gres[k] = c
        else:
            grem[k] = c
    mk = lambda d: TruncatedSeries(d, g.n_max, g.m_max)
    return mk(g0), mk(gres), mk(grem)


def check_conditions(field: FieldSpec) -> ConditionReport:
    """Report on the three standing conditions of the prepared field.

    cond_x is structural (support of R in n >= a), cond_a is the spectral
    inequality a + Re(1/lambda) >= 0 with its strictness flag, and cond_r is
    the polydisc smallness bound sup|R| <= ||R|| rho^a < 1.
    """
    cond_x = all(n >= field.a for (n, _) in field.R.coeffs)
    a_val, holds_a, strict_a = field.lam.condition_a(field.a)
    sup_bound = field.r_norm() * field.disc.rho ** field.a
    return ConditionReport(
        cond_x=cond_x,
        cond_a=holds_a,
        cond_a_strict=strict_a,
        cond_r=sup_bound < 1.0,
        a_plus_re_inv=a_val,
        sup_abs_r_bound=sup_bound,
    )


# ---------------------------------------------------------------------------
# Finite-order preparation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PreparedField:
    """Result of the finite-order preparation Z = U * X_R.

    ``change`` is the pair (forward, backward) of polynomial coordinate maps,
    each a pair of series; forward sends the new coordinates to the old ones.
    Pulling the input field back through the forward map reproduces
    U * X_R modulo total degree ``jet_order``.
    """

    field: FieldSpec
    U: TruncatedSeries
    change: tuple[tuple[TruncatedSeries, TruncatedSeries], tuple[TruncatedSeries, TruncatedSeries]]
    jet_order: int

    def __post_init__(self):
        u0 = self.U.coefficient(0, 0)
        if u0 == 0:
            raise InternalConsistencyError("unit factor vanishes at the origin")
        a = self.field.a
        for (n, m) in self.U.coeffs:
            if (n, m) != (0, 0) and (n < a or m < 1):
                raise InternalConsistencyError(
                    f"U - U(0,0) has support outside {{n >= {a}, m >= 1}} at {(n, m)}"
                )
        for (n, m) in self.field.R.coeffs:
            if n < a or m < 1:
                raise InternalConsistencyError(
                    f"R has support outside {{n >= {a}, m >= 1}} at {(n, m)}"
                )


def _identity_map() -> tuple[TruncatedSeries, TruncatedSeries]:
    return TruncatedSeries.monomial(1, 0), TruncatedSeries.monomial(0, 1)


def pullback_field(
    a_comp: TruncatedSeries,
    b_comp: TruncatedSeries,
    chart: tuple[TruncatedSeries, TruncatedSeries],
    max_total: int,
) -> tuple[TruncatedSeries, TruncatedSeries]:
    """Pull a planar field back through the polynomial chart (new -> old).

    Returns (D chart)^(-1) . (A, B) o chart, truncated at total degree.
    """
    phi1, phi2 = chart
    j11, j12 = phi1.diff_x().truncate_total(max_total), phi1.diff_y().truncate_total(max_total)
    j21, j22 = phi2.diff_x().truncate_total(max_total), phi2.diff_y().truncate_total(max_total)
    det = (j11 * j22 - j12 * j21).truncate_total(max_total)
    inv_det = det.reciprocal_total(max_total)
    a_sub = a_comp.compose(phi1, phi2, max_total)
    b_sub = b_comp.compose(phi1, phi2, max_total)
    new_a = (inv_det * (j22 * a_sub - j12 * b_sub)).truncate_total(max_total)
    new_b = (inv_det * (j11 * b_sub - j21 * a_sub)).truncate_total(max_total)
    return new_a, new_b


def invert_map(
    chart: tuple[TruncatedSeries, TruncatedSeries], max_total: int
) -> tuple[TruncatedSeries, TruncatedSeries]:
    """Compositional inverse of a near-identity polynomial map, mod degree."""
    ident = _identity_map()
    p1 = chart[0] - ident[0]
    p2 = chart[1] - ident[1]
    psi1, psi2 = ident
    for _ in range(max_total):
        psi1_new = ident[0] - p1.compose(psi1, psi2, max_total)
        psi2_new = ident[1] - p2.compose(psi1, psi2, max_total)
        if psi1_new.coeffs == psi1.coeffs and psi2_new.coeffs == psi2.coeffs:
            break
        psi1, psi2 = psi1_new, psi2_new
    return psi1, psi2


def _degree_terms(s: TruncatedSeries, k: int) -> dict[Index, complex]:
    return {idx: c for idx, c in s.coeffs.items() if idx[0] + idx[1] == k}


def prepare_field(
    a_jet: TruncatedSeries,
    b_jet: TruncatedSeries,
    jet_order: int,
    *,
    exact: tuple[int, int] | None = None,
    disc: Polydisc | None = None,
) -> PreparedField:
    """Bring a non-degenerate jet into the form U * X_R at finite order.

    The input field A d/dx + B d/dy must have a diagonal linear part with
    eigenvalues (mu1, mu2); the ratio lambda = mu1/mu2 must not be a
    nonnegative real.  The homological equation is solved monomial by
    monomial: terms absorbable into the allowed supports of U and R
    (n >= a, m >= 1) are absorbed, every other term is removed by a
    polynomial coordinate change, skipping exactly the resonant divisors
    (which by construction always fall inside the absorbable support).

    ``exact`` optionally tags lambda as -p/q; without it a negative real
    float ratio within 1e-12 of a small rational is promoted with a warning.
    """
    if jet_order < 2:
        raise PreconditionError("jet_order must be at least 2")
    mu1 = a_jet.coefficient(1, 0)
    mu2 = b_jet.coefficient(0, 1)
    if mu1 == 0 or mu2 == 0:
        raise PreconditionError("linear part is degenerate (zero eigenvalue)")
    if a_jet.coefficient(0, 1) != 0 or b_jet.coefficient(1, 0) != 0:
        raise PreconditionError("linear part is not diagonal")
    if a_jet.coefficient(0, 0) != 0 or b_jet.coefficient(0, 0) != 0:
        raise PreconditionError("field does not vanish at the origin")

    lam_val = mu1 / mu2
    if lam_val.imag == 0.0 and lam_val.real >= 0.0:
        raise UnsupportedRatioError(f"eigenvalue ratio {lam_val} is a nonnegative real")

    if exact is None and lam_val.imag == 0.0 and lam_val.real < 0.0:
        from .resonance import nearest_rational

        cand = nearest_rational(-lam_val.real)
        if cand is not None:
            if abs(lam_val.real + cand[0] / cand[1]) > 0.0:
                warnings.warn(
                    f"float ratio {lam_val.real} promoted to exact -{cand[0]}/{cand[1]} "
                    "for resonance decisions; pass exact=(p, q) to silence",
                    stacklevel=2,
                )
            exact = cand
    lam = EigenRatio(lam_val, exact)

    if exact is not None:
        a_order = exact[1]
    else:
        a_order = max(1, math.ceil(-lam.inv_re()))

    J = jet_order
    cur_a = a_jet.scaled(1.0 / mu2).truncate_total(J)
    cur_b = b_jet.scaled(1.0 / mu2).truncate_total(J)
    u_terms: dict[Index, complex] = {}
    r_terms: dict[Index, complex] = {}
    forward = _identity_map()
    x_mono = TruncatedSeries.monomial(1, 0)
    y_mono = TruncatedSeries.monomial(0, 1)

    for k in range(2, J + 1):
        u_hat = TruncatedSeries.from_terms({(0, 0): 1.0, **u_terms})
        alpha = _degree_terms(cur_a - (x_mono * u_hat).scaled(lam_val).truncate_total(J), k)
        xi: dict[Index, complex] = {}
        for (n, m), c in sorted(alpha.items()):
            if m >= 1 and n - 1 >= a_order:
                u_terms[(n - 1, m)] = u_terms.get((n - 1, m), 0j) + c / lam_val
            else:
                if lam.is_resonant(n - 1, m):
                    raise InternalConsistencyError(
                        f"unremovable x-component obstruction at {(n, m)}"
                    )
                xi[(n, m)] = c / (n * lam_val + m - lam_val)

        u_hat = TruncatedSeries.from_terms({(0, 0): 1.0, **u_terms})
        r_hat = TruncatedSeries.from_terms(r_terms) if r_terms else TruncatedSeries.zero()
        target_b = (y_mono * (TruncatedSeries.constant(1.0) + r_hat) * u_hat).truncate_total(J)
        beta = _degree_terms(cur_b - target_b, k)
        eta: dict[Index, complex] = {}
        for (n, m), c in sorted(beta.items()):
            if m >= 2 and n >= a_order:
                r_terms[(n, m - 1)] = r_terms.get((n, m - 1), 0j) + c
            else:
                if m >= 1 and lam.is_resonant(n, m - 1):
                    raise InternalConsistencyError(
                        f"unremovable y-component obstruction at {(n, m)}"
                    )
                eta[(n, m)] = c / (n * lam_val + m - 1)

        if xi or eta:
            step = (
                x_mono + TruncatedSeries.from_terms(xi),
                y_mono + TruncatedSeries.from_terms(eta),
            )
            cur_a, cur_b = pullback_field(cur_a, cur_b, step, J)
            forward = (
                forward[0].compose(step[0], step[1], J),
                forward[1].compose(step[0], step[1], J),
            )

    u_hat = TruncatedSeries.from_terms({(0, 0): 1.0, **u_terms})
    r_hat = TruncatedSeries.from_terms(r_terms) if r_terms else TruncatedSeries.zero()
    resid_a = (cur_a - (x_mono * u_hat).scaled(lam_val)).truncate_total(J)
    resid_b = (cur_b - y_mono * (TruncatedSeries.constant(1.0) + r_hat) * u_hat).truncate_total(J)
    scale = max(
        (abs(c) for c in (*cur_a.coeffs.values(), *cur_b.coeffs.values())), default=1.0
    )
    for resid in (resid_a, resid_b):
        for idx, c in resid.coeffs.items():
            if idx[0] + idx[1] >= 2 and abs(c) > PREPARE_RESIDUAL_RTOL * scale:
                raise InternalConsistencyError(
                    f"preparation residual {c!r} at {idx} exceeds tolerance"
                )

    backward = invert_map(forward, J)
    u_final = u_hat.scaled(mu2)
    field_spec = FieldSpec(lam, a_order, r_hat, disc if disc is not None else Polydisc(1.0, 1.0))
    return PreparedField(field=field_spec, U=u_final, change=(forward, backward), jet_order=J)
