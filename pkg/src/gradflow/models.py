"""Concrete gradient-flow models.

A model bundles the linear operator of the free energy (as a Fourier
symbol), the mobility operator selecting the flow metric, and one or two
pointwise nonlinear energy densities with their derivatives.  The free
energy is  E(phi) = 1/2 (phi, L phi) + sum_terms integral F_term(phi).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .spectral import (
    Array,
    Field,
    FourierMultiplier,
    GridSpec,
    apply_multiplier,
    inner_product,
    integral,
    multiplier_from_symbol,
    squared_wavenumber,
)

MODEL_NAMES = ("allen_cahn", "cahn_hilliard_beta", "pfc", "heat", "custom_split")

# Mobility symbols may dip this far below zero from rounding.
_MOBILITY_FLOOR = -1e-12


@dataclass(frozen=True)
class NonlinearTerm:
    """Pointwise energy density and its analytic derivative."""

    density: Callable[[Array], Array]
    derivative: Callable[[Array], Array]


@dataclass(frozen=True)
class ModelSpec:
    name: str
    linear_symbol: FourierMultiplier
    mobility_symbol: FourierMultiplier
    terms: tuple[NonlinearTerm, ...]
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.terms) not in (1, 2):
            raise ValueError("a model carries one or two nonlinear terms")
        if self.mobility_symbol.symbol.min() < _MOBILITY_FLOOR:
            raise ValueError("mobility operator must be positive semidefinite")

    @property
    def grid(self) -> GridSpec:
        return self.linear_symbol.grid


def _require(params: dict, keys: tuple[str, ...], name: str) -> None:
    missing = [k for k in keys if k not in params]
    if missing:
        raise ValueError(f"model {name!r} needs params {missing}")


def double_well_terms(eps: float) -> tuple[NonlinearTerm, ...]:
    """F = (phi^2-1)^2 / (4 eps^2), the classic double well."""
    c = 1.0 / (4.0 * eps * eps)
    return (
        NonlinearTerm(
            density=lambda phi: c * (phi * phi - 1.0) ** 2,
            derivative=lambda phi: (4.0 * c) * phi * (phi * phi - 1.0),
        ),
    )


def shifted_well_terms(beta: float) -> tuple[NonlinearTerm, ...]:
    """F = (phi^2 - 1 - beta)^2 / 4; the beta-stabilised well."""
    return (
        NonlinearTerm(
            density=lambda phi: 0.25 * (phi * phi - 1.0 - beta) ** 2,
            derivative=lambda phi: phi * (phi * phi - 1.0 - beta),
        ),
    )


def quartic_terms() -> tuple[NonlinearTerm, ...]:
    """F = phi^4 / 4 (crystal-density models)."""
    return (
        NonlinearTerm(
            density=lambda phi: 0.25 * phi ** 4,
            derivative=lambda phi: phi ** 3,
        ),
    )


def split_shifted_well_terms(beta: float) -> tuple[NonlinearTerm, ...]:
    """The beta-stabilised well split into two disparate terms.

    F1 = phi^4/4 and F2 = -(1+beta) phi^2/2 + (1+beta)^2/4, so that
    F1 + F2 equals the single shifted well exactly, constant included.
    Used by the two-factor stepper and cross-checked against the
    single-term model.
    """
    b1 = 1.0 + beta
    const = 0.25 * b1 * b1
    return (
        NonlinearTerm(
            density=lambda phi: 0.25 * phi ** 4,
            derivative=lambda phi: phi ** 3,
        ),
        NonlinearTerm(
            density=lambda phi: -0.5 * b1 * phi * phi + const,
            derivative=lambda phi: -b1 * phi,
        ),
    )


def build_model(name: str, params: dict, grid: GridSpec) -> ModelSpec:
    """Assemble one of the shipped models on a grid.

    allen_cahn          L = -Lap, G = M*I,    F = (phi^2-1)^2/(4 eps^2)
    cahn_hilliard_beta  L = -eps^2*Lap + beta*I, G = -M*Lap,
                        F = (phi^2-1-beta)^2/4
    pfc                 L = (1+Lap)^2 - eps,  G = -Lap,  F = phi^4/4
    heat                L = -Lap, G = I, F = 0  (linear test model)
    custom_split        cahn_hilliard_beta energy split into two terms
                        (pass explicit terms via params["terms"] to override)
    """
    if name not in MODEL_NAMES:
        raise ValueError(f"unknown model {name!r}; expected one of {MODEL_NAMES}")
    k2 = squared_wavenumber(grid)
    ones = np.ones(grid.mode_shape)

    if name == "allen_cahn":
        _require(params, ("epsilon", "mobility"), name)
        eps, mob = float(params["epsilon"]), float(params["mobility"])
        return ModelSpec(
            name,
            linear_symbol=multiplier_from_symbol(grid, k2),
            mobility_symbol=multiplier_from_symbol(grid, mob * ones),
            terms=double_well_terms(eps),
            params=dict(params),
        )
    if name == "cahn_hilliard_beta":
        _require(params, ("epsilon", "mobility", "beta"), name)
        eps, mob, beta = (float(params[k]) for k in ("epsilon", "mobility", "beta"))
        return ModelSpec(
            name,
            linear_symbol=multiplier_from_symbol(grid, eps * eps * k2 + beta),
            mobility_symbol=multiplier_from_symbol(grid, mob * k2),
            terms=shifted_well_terms(beta),
            params=dict(params),
        )
    if name == "pfc":
        _require(params, ("epsilon",), name)
        eps = float(params["epsilon"])
        mob = float(params.get("mobility", 1.0))
        # (1 + Lap)^2 - eps acts as (1 - |k|^2)^2 - eps; indefinite for
        # eps > 0 near |k| = 1.  The assembled step matrix is checked for
        # invertibility at scheme setup, not here.
        return ModelSpec(
            name,
            linear_symbol=multiplier_from_symbol(grid, (1.0 - k2) ** 2 - eps),
            mobility_symbol=multiplier_from_symbol(grid, mob * k2),
            terms=quartic_terms(),
            params=dict(params),
        )
    if name == "heat":
        zero = NonlinearTerm(
            density=lambda phi: np.zeros_like(phi),
            derivative=lambda phi: np.zeros_like(phi),
        )
        return ModelSpec(
            name,
            linear_symbol=multiplier_from_symbol(grid, k2),
            mobility_symbol=multiplier_from_symbol(grid, ones),
            terms=(zero,),
            params=dict(params),
        )
    # custom_split: the shifted-well energy as two disparate terms, or any
    # caller-supplied pair.
    terms = params.get("terms")
    if terms is None:
        _require(params, ("epsilon", "mobility", "beta"), name)
        terms = split_shifted_well_terms(float(params["beta"]))
    eps, mob = float(params["epsilon"]), float(params["mobility"])
    beta = float(params["beta"])
    return ModelSpec(
        name,
        linear_symbol=multiplier_from_symbol(grid, eps * eps * k2 + beta),
        mobility_symbol=multiplier_from_symbol(grid, mob * k2),
        terms=tuple(terms),
        params={k: v for k, v in params.items() if k != "terms"},
    )


def f_prime(model: ModelSpec, term: int, phi: Field) -> Field:
    """Pointwise derivative of the term's energy density at phi."""
    if not 0 <= term < len(model.terms):
        raise IndexError(f"term index {term} out of range")
    return Field(phi.grid, model.terms[term].derivative(phi.values))


def f_integral(model: ModelSpec, term: int, phi: Field) -> float:
    """Integral of the term's energy density over the domain."""
    if not 0 <= term < len(model.terms):
        raise IndexError(f"term index {term} out of range")
    return integral(Field(phi.grid, model.terms[term].density(phi.values)))


def nonlinear_energy(model: ModelSpec, phi: Field) -> float:
    return sum(f_integral(model, i, phi) for i in range(len(model.terms)))


def energy_original(model: ModelSpec, phi: Field) -> float:
    """E(phi) = 1/2 (phi, L phi) + sum_terms integral F_term(phi)."""
    lin = 0.5 * inner_product(phi, apply_multiplier(phi, model.linear_symbol))
    return lin + nonlinear_energy(model, phi)
