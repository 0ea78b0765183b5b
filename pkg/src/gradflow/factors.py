"""Scalar zero-factor machinery.

The correction factor multiplying the explicit nonlinear force is an affine
function p = slope*u + offset of one scalar unknown u per step.  Inserting
phi_new = phi_bar + p*q into the discrete energy-balance equation

    drift = (1 + p) * (s0 + multiplicity * p * s1)

yields a quadratic in u.  This module builds that affine form for both
factor kinds and both time discretisations, assembles and solves the
quadratic, and applies the documented round-off fallback (p = 0, which
degrades the step to the plain semi-implicit scheme).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Fallback triggers: energy drift at round-off scale, or a root drifting
# toward the spurious p = -1 solution, per the solver's safeguard rule.
DRIFT_FLOOR = 1e-15
NEAR_MINUS_ONE = 0.5
# |a| below this (relative) collapses the quadratic to its linear part.
DEGENERATE_A = 1e-14

BRANCH_QUADRATIC = "quadratic"
BRANCH_LINEAR = "linear"
BRANCH_FALLBACK = "fallback"
BRANCH_FROZEN = "frozen"


@dataclass(frozen=True)
class FactorSpec:
    """Choice of the scalar factor: proportional (k*eta) or rate (k*d eta/dt).

    For the proportional kind the factor vanishes at t=0 only if eta(0)=0,
    so ``eta_init`` must be zero there; the rate kind admits any start value.
    """

    kind: str  # "proportional" | "rate"
    k: float = 1.0
    eta_init: float = 0.0

    def __post_init__(self):
        if self.kind not in ("proportional", "rate"):
            raise ValueError(f"factor kind must be proportional or rate, got {self.kind!r}")
        if self.k == 0.0:
            raise ValueError("factor coefficient k must be nonzero")
        if self.kind == "proportional" and self.eta_init != 0.0:
            raise ValueError("proportional factor requires eta_init = 0")


@dataclass(frozen=True)
class AffineFactor:
    """Factor value as p = slope*u + offset in the step's unknown u."""

    slope: float
    offset: float

    def __post_init__(self):
        if self.slope == 0.0:
            raise ValueError("factor must depend on the unknown (slope != 0)")

    def value(self, u: float) -> float:
        return self.slope * u + self.offset

    def solve_for(self, p: float) -> float:
        return (p - self.offset) / self.slope


@dataclass(frozen=True)
class QuadraticCoeffs:
    a: float
    b: float
    c: float

    def residual(self, u: float) -> float:
        return (self.a * u + self.b) * u + self.c


def affine_factor_form(
    spec: FactorSpec,
    scheme: str,
    dt: float,
    eta_hist: tuple[float, float],
) -> AffineFactor:
    """Affine form of the factor in the step's scalar unknown.

    scheme "cn":
        proportional: p = k*u with u the midpoint eta value.
        rate:         p = (k/dt)*(u - eta_n) with u the new eta level.
    scheme "bdf2":
        proportional: p = k*u with u the new eta level.
        rate:         p = k*(3u - 4 eta_n + eta_nm1)/(2 dt).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if scheme not in ("cn", "bdf2"):
        raise ValueError(f"scheme must be cn or bdf2, got {scheme!r}")
    eta_n, eta_nm1 = eta_hist
    if spec.kind == "proportional":
        return AffineFactor(slope=spec.k, offset=0.0)
    if scheme == "cn":
        return AffineFactor(slope=spec.k / dt, offset=-spec.k * eta_n / dt)
    return AffineFactor(
        slope=1.5 * spec.k / dt,
        offset=-spec.k * (4.0 * eta_n - eta_nm1) / (2.0 * dt),
    )


def assemble_quadratic(
    s0: float,
    s1: float,
    drift: float,
    factor: AffineFactor,
    multiplicity: int,
) -> QuadraticCoeffs:
    """Expand drift = (1+p)(s0 + multiplicity*p*s1), p = slope*u + offset.

    multiplicity is 1 for the midpoint scheme and 3 for the two-step
    scheme (whose balance equation carries 3*p*q in the history term).
    """
    sl, off = factor.slope, factor.offset
    m = float(multiplicity)
    a = m * s1 * sl * sl
    b = sl * (s0 + m * s1 * (1.0 + 2.0 * off))
    c = (1.0 + off) * (s0 + m * off * s1) - drift
    return QuadraticCoeffs(a, b, c)


def _real_roots(q: QuadraticCoeffs) -> list[float] | None:
    """Roots of a*u^2+b*u+c, or None when the discriminant is negative.

    Uses the cancellation-safe form: the larger-magnitude root from the
    quadratic formula, the other from c/(a*u1).
    """
    scale = max(abs(q.b), abs(q.c), 1.0)
    if abs(q.a) <= DEGENERATE_A * scale:
        if abs(q.b) <= DEGENERATE_A * max(abs(q.c), 1.0):
            return None
        return [-q.c / q.b]
    disc = q.b * q.b - 4.0 * q.a * q.c
    if disc < 0.0:
        return None
    sq = math.sqrt(disc)
    if q.b >= 0.0:
        t = -0.5 * (q.b + sq)
    else:
        t = -0.5 * (q.b - sq)
    roots = [t / q.a]
    if t != 0.0:
        roots.append(q.c / t)
    else:
        roots.append(0.0)
    return roots


def solve_zero_factor(
    q: QuadraticCoeffs,
    factor: AffineFactor,
    drift: float,
    s0: float,
    s1: float,
    multiplicity: int,
) -> tuple[float, float, str]:
    """Pick the factor value for one step: returns (u, p, branch).

    Roots landing strictly within 0.5 of the spurious value -1 are
    inadmissible (they cancel the explicit force and signal an
    untrustworthy balance); among the admissible real roots the one
    minimising |p| is selected, since the exact flow has p identically
    zero.  Two degraded branches cover the rest:

    * ``fallback`` (p = 0) when the drift sits at round-off scale; the
      step is the plain semi-implicit one, which is the consistent limit.
    * ``frozen`` (p = -1) when no admissible real root exists; the factor
      cancels the explicit force entirely, leaving the unconditionally
      contractive implicit-linear step.  This is the stability-safe choice
      in regimes where the explicit force cannot satisfy the balance at
      all (the caller re-derives the auxiliary from the balance equation
      so the energy theorem still applies).
    """
    if abs(drift) < DRIFT_FLOOR:
        return factor.solve_for(0.0), 0.0, BRANCH_FALLBACK
    scale = max(abs(q.b), abs(q.c), 1.0)
    degenerate = abs(q.a) <= DEGENERATE_A * scale
    roots = _real_roots(q)
    admissible = [] if roots is None else [
        r for r in roots if abs(factor.value(r) + 1.0) >= NEAR_MINUS_ONE
    ]
    if not admissible:
        return factor.solve_for(-1.0), -1.0, BRANCH_FROZEN
    u = min(admissible, key=lambda r: abs(factor.value(r)))
    p = _polish_root(factor.value(u), drift, s0, s1, multiplicity)
    return factor.solve_for(p), p, BRANCH_LINEAR if degenerate else BRANCH_QUADRATIC


def _polish_root(p: float, drift: float, s0: float, s1: float,
                 multiplicity: int) -> float:
    """Newton-polish a balance root directly in p (better conditioned than
    the assembled coefficients for |p| >> 1)."""
    for _ in range(2):
        res = balance_residual(p, drift, s0, s1, multiplicity)
        slope = s0 + multiplicity * s1 * (1.0 + 2.0 * p)
        if res == 0.0 or slope == 0.0:
            break
        candidate = p - res / slope
        if abs(balance_residual(candidate, drift, s0, s1, multiplicity)) < abs(res):
            p = candidate
        else:
            break
    return p


def balance_residual(
    p: float, drift: float, s0: float, s1: float, multiplicity: int
) -> float:
    """Residual of the scalar balance equation at factor value p."""
    return (1.0 + p) * (s0 + multiplicity * p * s1) - drift


# Two-factor variant: a second factor value t = slope*u + offset multiplies
# the second nonlinear term, sharing the same scalar unknown u.  The balance
# equation couples both corrections:
#
#   drift = (1+p)(d1 + p*e11 + t*e12) + (1+t)(d2 + p*e21 + t*e22)
#
# with d_i = (F_i', history combination) and e_ij = (F_i', q_j).


def _affine_product(x: AffineFactor, y: AffineFactor) -> tuple[float, float, float]:
    """(c0, c1, c2) of (slope_x u + off_x)(slope_y u + off_y)."""
    return (
        x.offset * y.offset,
        x.slope * y.offset + y.slope * x.offset,
        x.slope * y.slope,
    )


def assemble_quadratic_two_term(
    d1: float,
    e11: float,
    e12: float,
    d2: float,
    e21: float,
    e22: float,
    drift: float,
    p_form: AffineFactor,
    s_form: AffineFactor,
) -> QuadraticCoeffs:
    """Collect the two-factor balance equation into a*u^2 + b*u + c = 0."""
    c0 = d1 + d2 - drift
    c1 = 0.0
    c2 = 0.0
    # linear contributions: p*(d1 + e11 + e21) + t*(d2 + e12 + e22)
    c0 += p_form.offset * (d1 + e11 + e21) + s_form.offset * (d2 + e12 + e22)
    c1 += p_form.slope * (d1 + e11 + e21) + s_form.slope * (d2 + e12 + e22)
    # quadratic contributions: p^2*e11 + p*t*(e12 + e21) + t^2*e22
    for x, y, w in (
        (p_form, p_form, e11),
        (p_form, s_form, e12 + e21),
        (s_form, s_form, e22),
    ):
        q0, q1, q2 = _affine_product(x, y)
        c0 += w * q0
        c1 += w * q1
        c2 += w * q2
    return QuadraticCoeffs(c2, c1, c0)


def two_term_balance_residual(
    p: float,
    s: float,
    d1: float,
    e11: float,
    e12: float,
    d2: float,
    e21: float,
    e22: float,
    drift: float,
) -> float:
    return (
        (1.0 + p) * (d1 + p * e11 + s * e12)
        + (1.0 + s) * (d2 + p * e21 + s * e22)
        - drift
    )


def solve_zero_factor_two_term(
    q: QuadraticCoeffs,
    p_form: AffineFactor,
    s_form: AffineFactor,
    drift: float,
    second_term_active: bool,
    pairings: tuple[float, float, float, float, float, float],
) -> tuple[float, float, float, str]:
    """Two-factor root selection: returns (u, p, s, branch).

    Selection minimises |p| (ties broken by |s|) among admissible roots,
    which makes the scheme collapse exactly onto the single-factor path
    when the second term vanishes.  The -1 admissibility window on s only
    applies while the second term is active; an inert term leaves s
    physically meaningless.
    """
    if abs(drift) < DRIFT_FLOOR:
        return p_form.solve_for(0.0), 0.0, 0.0, BRANCH_FALLBACK
    scale = max(abs(q.b), abs(q.c), 1.0)
    degenerate = abs(q.a) <= DEGENERATE_A * scale
    roots = _real_roots(q)

    def admissible(r: float) -> bool:
        if abs(p_form.value(r) + 1.0) < NEAR_MINUS_ONE:
            return False
        if second_term_active and abs(s_form.value(r) + 1.0) < NEAR_MINUS_ONE:
            return False
        return True

    candidates = [] if roots is None else [r for r in roots if admissible(r)]
    if not candidates:
        return p_form.solve_for(-1.0), -1.0, -1.0, BRANCH_FROZEN
    u = min(candidates, key=lambda r: (abs(p_form.value(r)), abs(s_form.value(r))))
    u = _polish_root_two_term(u, pairings, drift, p_form, s_form)
    p = p_form.value(u)
    s = s_form.value(u)
    return u, p, s, BRANCH_LINEAR if degenerate else BRANCH_QUADRATIC


def _polish_root_two_term(u: float, pairings, drift,
                          p_form: AffineFactor, s_form: AffineFactor) -> float:
    d1, e11, e12, d2, e21, e22 = pairings

    def res_at(x: float) -> float:
        return two_term_balance_residual(
            p_form.value(x), s_form.value(x), d1, e11, e12, d2, e21, e22, drift
        )

    for _ in range(2):
        res = res_at(u)
        p, s = p_form.value(u), s_form.value(u)
        slope = (
            p_form.slope * ((d1 + p * e11 + s * e12) + (1.0 + p) * e11 + (1.0 + s) * e21)
            + s_form.slope * ((1.0 + p) * e12 + (d2 + p * e21 + s * e22) + (1.0 + s) * e22)
        )
        if res == 0.0 or slope == 0.0:
            break
        candidate = u - res / slope
        if abs(res_at(candidate)) < abs(res):
            u = candidate
        else:
            break
    return u
