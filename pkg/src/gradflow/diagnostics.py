"""Energy bookkeeping, convergence studies, and small-grid dense oracles.

The dense oracle rebuilds every diagonal operator as an explicit matrix via
fully materialised DFT matrices and solves the predictor step with a dense
factorisation; it shares no code with the spectral path and is the
reference the fast path is tested against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.ndimage

from .models import ModelSpec
from .schemes import SchemeState, advance, initial_state
from .spectral import (
    Array,
    Field,
    FourierMultiplier,
    GridSpec,
    irfft,
    rfft,
    squared_wavenumber,
)

DENSE_NODE_LIMIT = 4096


@dataclass(frozen=True)
class ConvergenceTable:
    """Final-time max-norm errors over a time-step ladder."""

    dts: tuple[float, ...]
    errors: tuple[float, ...]
    rates: tuple[float, ...]


def compute_mu(state_new: SchemeState, state_old: SchemeState, model: ModelSpec,
               dt: float, p_value: float, scheme: str,
               s_value: float = 0.0) -> Field:
    """Chemical potential of the step, rebuilt from the two states.

    midpoint: mu = 1/2 L (phi_new + phi_old) + (1+p) F'(extrap)
    two-step: mu = L phi_new + (1+p) F'(extrap)
    Two-term models weight the second force with (1+s).
    """
    grid = state_new.phi.grid
    l = model.linear_symbol.symbol
    phi_new = state_new.phi.values
    phi_old = state_old.phi.values
    if scheme == "cn":
        extrap = 1.5 * phi_old - 0.5 * state_old.phi_prev.values
        lin = irfft(grid, 0.5 * l * (rfft(grid, phi_new) + rfft(grid, phi_old)))
    elif scheme == "bdf2":
        extrap = 2.0 * phi_old - state_old.phi_prev.values
        lin = irfft(grid, l * rfft(grid, phi_new))
    else:
        raise ValueError(f"scheme must be cn or bdf2, got {scheme!r}")
    mu = lin + (1.0 + p_value) * model.terms[0].derivative(extrap)
    if len(model.terms) == 2:
        mu = mu + (1.0 + s_value) * model.terms[1].derivative(extrap)
    return Field(grid, mu)


def modified_energy(state: SchemeState, model: ModelSpec, scheme: str) -> float:
    """The scheme-specific dissipated energy at the state's level.

    midpoint family: 1/2 (phi, L phi) + sum(aux)
    two-step:        1/4 (phi, L phi) + 1/4 (2 phi - phi_prev, L (.))
                     + 3/2 sum(aux) - 1/2 sum(aux_prev)
    sav:             1/2 (phi, L phi) + r^2 - C
    """
    grid = state.phi.grid
    l = model.linear_symbol.symbol
    phi = state.phi.values

    def pair(f: Array, g: Array) -> float:
        return grid.cell_volume * float(np.dot(f.ravel(), g.ravel()))

    if scheme in ("cn", "rzf_cn", "zf_cn", "rmzf_cn"):
        return 0.5 * pair(phi, irfft(grid, l * rfft(grid, phi))) + state.aux_total
    if scheme in ("bdf2", "rzf_bdf2"):
        jump = 2.0 * phi - state.phi_prev.values
        return (
            0.25 * pair(phi, irfft(grid, l * rfft(grid, phi)))
            + 0.25 * pair(jump, irfft(grid, l * rfft(grid, jump)))
            + 1.5 * state.aux_total
            - 0.5 * float(sum(state.aux_prev))
        )
    if scheme == "sav_cn":
        raise ValueError("sav modified energy needs the constant; use sav_modified_energy")
    raise ValueError(f"unknown scheme {scheme!r}")


def sav_modified_energy(state: SchemeState, model: ModelSpec, c_sav: float) -> float:
    grid = state.phi.grid
    l = model.linear_symbol.symbol
    phi = state.phi.values
    lin = 0.5 * grid.cell_volume * float(
        np.dot(phi.ravel(), irfft(grid, l * rfft(grid, phi)).ravel())
    )
    return lin + state.sav_r ** 2 - c_sav


def run_fixed_steps(phi0: Field, model: ModelSpec, dt: float, n_steps: int,
                    scheme: str, factor=None, factors=None, c_sav: float = 1.0,
                    check: bool = True, dealias: bool = False,
                    collect=None) -> SchemeState:
    """March n_steps of the named scheme from phi0; optionally collect reports."""
    state = initial_state(phi0, model, factor, c_sav)
    for _ in range(n_steps):
        state, report = advance(state, model, dt, scheme, factor, factors,
                                c_sav, check=check, dealias=dealias)
        if collect is not None:
            collect(state, report)
    return state


def convergence_study(phi0: Field, model: ModelSpec, t_final: float,
                      dt_list: list[float], reference_dt: float, scheme: str,
                      factor=None, c_sav: float = 1.0,
                      reference_solution: Field | None = None,
                      check: bool = True) -> ConvergenceTable:
    """Final-time max-norm errors against a fine reference run.

    The reference is a same-scheme run at ``reference_dt`` unless an
    explicit reference solution (e.g. an exact one) is supplied.  Each dt
    must divide t_final to rounding accuracy.
    """
    if sorted(dt_list, reverse=True) != list(dt_list):
        raise ValueError("dt_list must be descending")
    if reference_solution is None:
        if not reference_dt < min(dt_list) / 10.0:
            raise ValueError("reference_dt must be below min(dt_list)/10")
        ref_state = run_fixed_steps(phi0, model, reference_dt,
                                    _step_count(t_final, reference_dt),
                                    scheme, factor, c_sav=c_sav, check=check)
        reference_solution = ref_state.phi
    errors = []
    for dt in dt_list:
        state = run_fixed_steps(phi0, model, dt, _step_count(t_final, dt),
                                scheme, factor, c_sav=c_sav, check=check)
        errors.append(float(np.abs(state.phi.values - reference_solution.values).max()))
    rates = tuple(
        float(np.log(errors[i - 1] / errors[i]) / np.log(dt_list[i - 1] / dt_list[i]))
        for i in range(1, len(errors))
    )
    return ConvergenceTable(tuple(dt_list), tuple(errors), rates)


def _step_count(t_final: float, dt: float) -> int:
    n = round(t_final / dt)
    if n < 1 or abs(n * dt - t_final) > 1e-8 * max(1.0, t_final):
        raise ValueError(f"dt={dt} does not divide t_final={t_final}")
    return n


# ---------------------------------------------------------------------------
# Dense oracle: explicit DFT matrices and a dense predictor solve.

def dense_transform_matrices(grid: GridSpec) -> tuple[Array, Array]:
    """Forward and inverse DFT matrices over flattened (row-major) nodes."""
    if grid.num_nodes > DENSE_NODE_LIMIT:
        raise ValueError(f"dense oracle limited to {DENSE_NODE_LIMIT} nodes")
    fwd = np.ones((1, 1), dtype=complex)
    for n in grid.dims:
        m = np.arange(n)
        axis = np.exp(-2j * np.pi * np.outer(m, m) / n)
        fwd = np.kron(fwd, axis)
    inv = fwd.conj().T / grid.num_nodes
    return fwd, inv


def full_spectrum_symbol(m: FourierMultiplier) -> Array:
    """Expand an rfft-layout real symbol to the full fftn layout.

    Modes dropped by the real transform take the value of their Hermitian
    partner (real symbols are even under k -> -k).
    """
    grid = m.grid
    dims = grid.dims
    half = m.symbol
    keep = dims[-1] // 2
    out = np.empty(dims)
    for idx in np.ndindex(dims):
        if idx[-1] <= keep:
            out[idx] = half[idx]
        else:
            partner = tuple((-j) % n for j, n in zip(idx[:-1], dims[:-1]))
            out[idx] = half[partner + (dims[-1] - idx[-1],)]
    return out


def dense_operator(m: FourierMultiplier) -> Array:
    """Materialise a Fourier multiplier as a dense real matrix."""
    fwd, inv = dense_transform_matrices(m.grid)
    sym = full_spectrum_symbol(m).ravel()
    op = inv @ (sym[:, None] * fwd)
    if np.abs(op.imag).max() > 1e-10 * max(1.0, np.abs(op.real).max()):
        raise ValueError("dense operator has a non-negligible imaginary part")
    return op.real


def dense_oracle_step(state: SchemeState, model: ModelSpec, dt: float,
                      scheme: str) -> tuple[Field, Field]:
    """Predictor pair (phi_bar, q) from a dense solve; the spectral oracle."""
    grid = state.phi.grid
    lmat = dense_operator(model.linear_symbol)
    gmat = dense_operator(model.mobility_symbol)
    gl = gmat @ lmat
    eye = np.eye(grid.num_nodes)
    phi = state.phi.values.ravel()
    phi_prev = state.phi_prev.values.ravel()
    if scheme == "cn":
        extrap = 1.5 * phi - 0.5 * phi_prev
        force = model.terms[0].derivative(extrap)
        for term in model.terms[1:]:
            force = force + term.derivative(extrap)
        amat = eye + 0.5 * dt * gl
        rhs_bar = (eye - 0.5 * dt * gl) @ phi - dt * (gmat @ force)
        rhs_q = -dt * (gmat @ model.terms[0].derivative(extrap))
    elif scheme == "bdf2":
        extrap = 2.0 * phi - phi_prev
        force = model.terms[0].derivative(extrap)
        for term in model.terms[1:]:
            force = force + term.derivative(extrap)
        amat = 3.0 * eye + 2.0 * dt * gl
        rhs_bar = 4.0 * phi - phi_prev - 2.0 * dt * (gmat @ force)
        rhs_q = -2.0 * dt * (gmat @ model.terms[0].derivative(extrap))
    else:
        raise ValueError(f"scheme must be cn or bdf2, got {scheme!r}")
    lu, piv = scipy.linalg.lu_factor(amat)
    phi_bar = scipy.linalg.lu_solve((lu, piv), rhs_bar)
    q = scipy.linalg.lu_solve((lu, piv), rhs_q)
    return (
        Field(grid, phi_bar.reshape(grid.dims)),
        Field(grid, q.reshape(grid.dims)),
    )


# ---------------------------------------------------------------------------
# Qualitative-dynamics probes used by the smoke tests.

def count_level_components(f: Field, level: float = 0.0) -> int:
    """Connected components of the region {f > level} (6/4-connectivity)."""
    mask = f.values > level
    _, count = scipy.ndimage.label(mask)
    return int(count)


def dominant_wavenumber(f: Field) -> float:
    """|k| of the strongest non-constant mode (radially binned power)."""
    grid = f.grid
    deviation = f.values - f.values.mean()
    power = np.abs(rfft(grid, deviation)) ** 2
    kmag = np.sqrt(squared_wavenumber(grid))
    flat_k = kmag.ravel()
    flat_p = power.ravel()
    nonzero = flat_k > 0
    bins = np.linspace(0.0, flat_k.max(), 200)
    which = np.digitize(flat_k[nonzero], bins)
    sums = np.bincount(which, weights=flat_p[nonzero], minlength=len(bins) + 1)
    peak = int(np.argmax(sums))
    lo = bins[peak - 1] if peak >= 1 else 0.0
    hi = bins[peak] if peak < len(bins) else flat_k.max()
    return float(0.5 * (lo + hi))


def replay_energy_inequalities(rows: list[dict], scheme: str,
                               tol: float = 1e-9) -> None:
    """Re-derive each step's energy inequality from logged trace rows.

    Rows are dicts with the trace-CSV fields.  Raises AssertionError on the
    first violated pair.  For two-step runs the bootstrap pair (step 0 -> 1)
    is skipped: its decrease is certified in midpoint form by the stepper.
    """
    start = 2 if scheme == "rzf_bdf2" else 1
    for prev, cur in zip(rows, rows[1:]):
        if cur["step"] < start:
            continue
        delta = cur["E_mod"] - prev["E_mod"]
        if scheme == "rzf_bdf2":
            budget = -(1.0 - 1.5 * cur["kappa"]) * cur["dissipation"]
        elif scheme == "zf_cn":
            budget = -cur["dissipation"]
        elif scheme == "sav_cn":
            budget = -cur["dissipation"]
        else:
            budget = -(1.0 - cur["kappa"]) * cur["dissipation"]
        scale = max(1.0, abs(prev["E_mod"]))
        if delta > budget + tol * scale:
            raise AssertionError(
                f"replayed inequality fails at step {cur['step']}: "
                f"delta={delta:.3e} budget={budget:.3e}"
            )
