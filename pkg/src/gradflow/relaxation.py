"""Optimal relaxation of the auxiliary energy variable.

After each step the auxiliary variable is pulled toward the true nonlinear
energy through R_new = lambda0 * R_tilde + (1 - lambda0) * F_int, with
lambda0 the smallest feasible weight under the dissipation budget
R_new - R_tilde <= kappa * dissipation.  The closed-form optimum is a
three-case table in the ratio dissipation / |R_tilde - F_int|.
"""

from __future__ import annotations

from dataclasses import dataclass

# Below this relative gap the two energies count as equal and the
# equal-case rule (lambda0 = 0, kappa = 0) applies.
_GAP_FLOOR = 1e-14


@dataclass(frozen=True)
class RelaxationInputs:
    """Scalars feeding one relaxation decision.

    dissipation already carries the time-step factor (dt*(G mu, mu) for the
    midpoint schemes, plus the quarter-weighted second-difference term for
    the two-step scheme) and is nonnegative up to rounding.
    """

    R_tilde: float
    F_int: float
    dissipation: float


def _gap_is_negligible(r_tilde: float, f_int: float) -> bool:
    return abs(r_tilde - f_int) <= _GAP_FLOOR * max(1.0, abs(r_tilde), abs(f_int))


def choose_relaxation_cn(inputs: RelaxationInputs) -> tuple[float, float]:
    """Optimal (lambda0, kappa) for the midpoint schemes, kappa in [0,1].

    Cases: R_tilde >= F_int        -> (0, 0)
           R_tilde <  F_int, a>=1  -> (0, 1/a)
           R_tilde <  F_int, a< 1  -> (1-a, 1)
    with a = dissipation / |R_tilde - F_int|.
    """
    rt, fi, diss = inputs.R_tilde, inputs.F_int, inputs.dissipation
    if _gap_is_negligible(rt, fi) or rt >= fi:
        return 0.0, 0.0
    alpha = diss / abs(rt - fi)
    if alpha >= 1.0:
        return 0.0, 1.0 / alpha
    return 1.0 - alpha, 1.0


def choose_relaxation_bdf2(inputs: RelaxationInputs) -> tuple[float, float]:
    """Optimal (lambda0, kappa) for the two-step scheme, kappa in [0, 2/3].

    Cases: R_tilde >= F_int          -> (0, 0)
           R_tilde <  F_int, b>=3/2  -> (0, 1/b)
           R_tilde <  F_int, b< 3/2  -> (1 - 2b/3, 2/3)
    with b = dissipation / |R_tilde - F_int|.
    """
    rt, fi, diss = inputs.R_tilde, inputs.F_int, inputs.dissipation
    if _gap_is_negligible(rt, fi) or rt >= fi:
        return 0.0, 0.0
    beta = diss / abs(rt - fi)
    if beta >= 1.5:
        return 0.0, 1.0 / beta
    return 1.0 - (2.0 / 3.0) * beta, 2.0 / 3.0


def relax_R(lambda0: float, R_tilde: float, F_int: float) -> float:
    """Convex update of the auxiliary variable."""
    if not 0.0 <= lambda0 <= 1.0:
        raise ValueError(f"lambda0 must lie in [0,1], got {lambda0}")
    return lambda0 * R_tilde + (1.0 - lambda0) * F_int
