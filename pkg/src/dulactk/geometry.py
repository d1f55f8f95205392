"""Searchlight-beam geometry and construction of the integration path.

All geometry lives in the logarithmic chart (z, w) -> (exp z, exp w), where
the polydisc becomes the half-space product {Re z < ln rho, Re w < ln r}.
A stability beam around the direction theta = -lambda/|lambda| is a cone of
rays along which lifted leaves have decreasing Re w, hence never leave the
polydisc; its admissible half-aperture is bounded by arccos(||R|| rho^a).

The integration path from z0 to the base fiber point z_star is polygonal:
in the saddle case (Re lambda < 0) it runs horizontally to the stability
threshold kappa, out to a standoff line Re z = ln rho - epsilon along a cone
boundary ray, vertically along that line, and back into z_star along the
matching ray; in the node case (Re lambda >= 0) two beam rays meet directly.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from .errors import ConditionError, DomainError, PathConstructionError, WrongCaseError
from .series import EigenRatio, Polydisc, require_finite

DELTA_MARGIN_DEFAULT = 0.1
EPSILON_FLOOR = 1e-3
_TINY = 1e-12

CASE_SADDLE = "saddle"
CASE_NODE = "node"
CASE_POINT = "point"


@dataclass(frozen=True)
class StabilityParams:
    """Beam direction and aperture data; kappa is None in the node case."""

    theta: complex
    delta: float
    delta_max: float
    kappa: float | None
    ln_rho: float
    ln_r: float

    def __post_init__(self):
        if abs(abs(self.theta) - 1.0) > 1e-9:
            raise DomainError("theta must be a unit complex number")
        if not (0.0 < self.delta < self.delta_max <= math.pi / 2 + 1e-15):
            raise DomainError("need 0 < delta < delta_max <= pi/2")


@dataclass(frozen=True)
class BasePoint:
    """Endpoint fiber data: (z_star, w_star) and the band half-width N*pi."""

    z_star: complex
    w_star: complex
    n_band: int

    def __post_init__(self):
        require_finite(self.z_star, "z_star")
        require_finite(self.w_star, "w_star")
        if self.n_band < 1:
            raise DomainError("band half-width N must be a positive integer")

    def validate(self, disc: Polydisc) -> None:
        if not self.z_star.real < disc.ln_rho:
            raise DomainError("Re z_star must be < ln rho")
        if not self.w_star.real < disc.ln_r:
            raise DomainError("Re w_star must be < ln r")

    def in_band(self, z: complex) -> bool:
        return abs((z - self.z_star).imag) <= math.pi * self.n_band + _TINY


@dataclass(frozen=True)
class IntegrationPath:
    vertices: tuple[complex, ...]
    case: str
    segment_directions: tuple[complex, ...]

    def segments(self):
        return tuple(zip(self.vertices[:-1], self.vertices[1:]))

    def length(self) -> float:
        return sum(abs(b - a) for a, b in self.segments())

    def to_json(self) -> dict:
        return {
            "case": self.case,
            "vertices": [{"re": v.real, "im": v.imag} for v in self.vertices],
        }


def stability_params(
    lam: EigenRatio,
    norm_r: float,
    disc: Polydisc,
    a: int,
    margin: float = DELTA_MARGIN_DEFAULT,
    z_star: complex | None = None,
) -> StabilityParams:
    """Beam direction theta = -lambda/|lambda| and aperture delta.

    delta_max = arccos(||R|| rho^a) is the admissible supremum; delta backs
    off from it by the given relative margin.  When z_star is supplied and
    the ratio is saddle-like, the stability threshold kappa is attached.
    """
    if not (0.0 < margin < 1.0):
        raise DomainError("margin must lie in (0, 1)")
    smallness = norm_r * disc.rho ** a
    if smallness >= 1.0:
        raise ConditionError(
            f"||R|| rho^a = {smallness} >= 1: the polydisc smallness condition fails"
        )
    theta = -lam.value / abs(lam.value)
    delta_max = math.acos(smallness)
    delta = (1.0 - margin) * delta_max
    kap = None
    if z_star is not None and lam.value.real < 0.0:
        kap = kappa(a, norm_r, theta, z_star)
    return StabilityParams(
        theta=theta,
        delta=delta,
        delta_max=delta_max,
        kappa=kap,
        ln_rho=disc.ln_rho,
        ln_r=disc.ln_r,
    )


def kappa(a: int, norm_r: float, theta: complex, z_star: complex) -> float:
    """Threshold below which the horizontal ray stays in the stability region.

    Solves cos(arg theta) = ||R|| exp(a kappa), capped at Re z_star; with
    ||R|| = 0 the ray never leaves stability and the cap is returned.
    """
    if theta.real <= 0.0:
        raise WrongCaseError("kappa is defined for the saddle case (Re lambda < 0) only")
    if norm_r < 0.0:
        raise DomainError("norm_r must be nonnegative")
    cap = z_star.real
    if norm_r == 0.0:
        return cap
    value = math.log(math.cos(cmath.phase(theta)) / norm_r) / a
    return min(cap, value)


def in_cone(direction: complex, theta: complex, delta: float) -> bool:
    """Whether a unit direction lies within the closed cone around theta."""
    if abs(abs(direction) - 1.0) > 1e-9:
        raise DomainError("direction must be a unit complex number")
    return abs(cmath.phase(direction / theta)) <= delta + _TINY


def signed_boundary_direction(theta: complex, delta: float) -> complex:
    """The cone-boundary ray used for the outward legs of the saddle path.

    theta*e^{+i delta} when Im lambda <= 0 (i.e. Im theta >= 0), else
    theta*e^{-i delta}; ties at Im lambda = 0 take the plus sign.
    """
    if theta.imag >= 0.0:
        return theta * cmath.exp(1j * delta)
    return theta * cmath.exp(-1j * delta)


def default_epsilon(params: StabilityParams) -> float:
    """Standoff from Re z = ln rho: 0.05 of the (ln rho - kappa) depth, floored."""
    if params.kappa is None:
        return EPSILON_FLOOR
    return max(EPSILON_FLOOR, 0.05 * (params.ln_rho - params.kappa))


def _dedupe(vertices: list[complex]) -> list[complex]:
    out = [vertices[0]]
    for v in vertices[1:]:
        if v != out[-1]:
            out.append(v)
    return out


def _directions(vertices: list[complex]) -> tuple[complex, ...]:
    return tuple((b - a) / abs(b - a) for a, b in zip(vertices[:-1], vertices[1:]))


def build_path(
    z0: complex,
    base: BasePoint,
    params: StabilityParams,
    epsilon: float | None = None,
) -> IntegrationPath:
    """Polygonal integration path from z0 to z_star inside the leaf domain.

    The output depends only on (z0, z_star, N) and the beam data, never on
    w_star.  Coincident consecutive vertices are collapsed.
    """
    require_finite(z0, "z0")
    z_star = base.z_star
    if not base.in_band(z0):
        raise DomainError(
            f"z0 is outside the admissible band |Im(z - z_star)| <= {base.n_band} pi"
        )
    if not z0.real < params.ln_rho:
        raise DomainError("Re z0 must be < ln rho")
    if z0 == z_star:
        return IntegrationPath((z0,), CASE_POINT, ())

    if params.theta.real > 0.0:  # saddle: Re lambda < 0
        if params.kappa is None:
            raise DomainError("saddle paths need params built with z_star (kappa)")
        eps = default_epsilon(params) if epsilon is None else epsilon
        if eps <= 0.0:
            raise DomainError("epsilon must be positive")
        x_line = params.ln_rho - eps
        theta_s = signed_boundary_direction(params.theta, params.delta)
        if theta_s.real <= _TINY:
            raise PathConstructionError(
                "no cone direction reaches Re z = ln rho - epsilon; "
                "reduce delta (larger margin) for this eigenvalue ratio"
            )
        z1 = complex(max(params.kappa, z0.real), z0.imag)
        t1 = (x_line - z1.real) / theta_s.real
        t2 = (x_line - z_star.real) / theta_s.real
        if t1 < 0.0 or t2 < 0.0:
            raise PathConstructionError(
                "endpoint lies beyond the standoff line Re z = ln rho - epsilon"
            )
        z2 = z1 + t1 * theta_s
        z3 = z_star + t2 * theta_s
        vertices = _dedupe([z0, z1, z2, z3, z_star])
        arg_sum = abs(cmath.phase(params.theta)) + params.delta
        if arg_sum < math.pi / 2:  # the crude band bound is meaningful only here
            allowed = 2 * math.pi * base.n_band + math.tan(arg_sum) * (params.ln_rho - params.kappa)
            if abs((z3 - z2).imag) > allowed + 1e-9:
                raise PathConstructionError(
                    f"vertical leg {abs((z3 - z2).imag)} exceeds the band bound {allowed}"
                )
        return IntegrationPath(tuple(vertices), CASE_SADDLE, _directions(vertices))

    # node: Re lambda >= 0, both beams open leftward and meet directly
    best = None
    d = z_star - z0
    for sign in (1.0, -1.0):
        theta_p = params.theta * cmath.exp(sign * 1j * params.delta)
        denom = (theta_p.conjugate() * params.theta).imag
        if abs(denom) < _TINY:
            continue
        t = (theta_p.conjugate() * d).imag / denom
        denom2 = (params.theta.conjugate() * theta_p).imag
        s = -(params.theta.conjugate() * d).imag / denom2
        if t >= -_TINY and s >= -_TINY:
            z1 = z0 + t * params.theta
            if z1.real < params.ln_rho and (best is None or t + s < best[0]):
                best = (t + s, z1)
    if best is None:
        raise PathConstructionError("node beams from z0 and z_star do not intersect")
    vertices = _dedupe([z0, best[1], z_star])
    return IntegrationPath(tuple(vertices), CASE_NODE, _directions(vertices))
