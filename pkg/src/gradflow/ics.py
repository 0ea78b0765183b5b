"""Initial conditions for the shipped experiments.

Random variants draw from a counter-based generator (Philox) so a seed
reproduces the same field on any platform.
"""

from __future__ import annotations

import math

import numpy as np

from .spectral import Field, GridSpec

IC_NAMES = (
    "cosine_product",
    "flower_tanh",
    "sphere_tanh",
    "two_spheres_tanh",
    "random_uniform",
    "pfc_random",
)


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _origin(params: dict, grid: GridSpec, default_centered: bool) -> tuple[float, ...]:
    if "offset" in params:
        off = params["offset"]
        if np.isscalar(off):
            off = (float(off),) * grid.ndim
        return tuple(float(o) for o in off)
    if default_centered:
        return tuple(-0.5 * l for l in grid.extents)
    return (0.0,) * grid.ndim


def make_initial_condition(name: str, params: dict, grid: GridSpec,
                           seed: int = 0) -> Field:
    """Evaluate a named initial profile on the grid.

    cosine_product    amp * prod_d cos(2 pi m x_d / L_d)            (m = mode)
    flower_tanh       tanh((1.7 + 1.2 cos(6 theta) - r)/(sqrt(2) eps)), 2D,
                      coordinates centered on the domain by default
    sphere_tanh       tanh((|x - center| - radius)/(sqrt(2) eps))
    two_spheres_tanh  1 - sum_i tanh((|x - c_i| - radius)/(sqrt(2) eps))
    random_uniform    amp * uniform[-1, 1]
    pfc_random        mean + amp * uniform[-1, 1], sample mean removed so the
                      discrete average equals ``mean`` exactly
    """
    if name not in IC_NAMES:
        raise ValueError(f"unknown initial condition {name!r}; expected one of {IC_NAMES}")
    params = dict(params)

    if name == "cosine_product":
        amp = float(params.get("amplitude", 0.001))
        mode = int(params.get("mode", 1))
        coords = grid.meshgrid(_origin(params, grid, default_centered=False))
        values = np.full(grid.dims, amp)
        for x, l in zip(coords, grid.extents):
            values = values * np.cos(2.0 * np.pi * mode * x / l)
        return Field(grid, values)

    if name == "flower_tanh":
        if grid.ndim != 2:
            raise ValueError("flower_tanh is a 2D profile")
        eps = float(params["epsilon"])
        x, y = grid.meshgrid(_origin(params, grid, default_centered=True))
        theta = np.arctan2(y, x)
        radius = np.sqrt(x * x + y * y)
        arg = (1.7 + 1.2 * np.cos(6.0 * theta) - radius) / (math.sqrt(2.0) * eps)
        return Field(grid, np.tanh(arg))

    if name == "sphere_tanh":
        eps = float(params["epsilon"])
        r0 = float(params.get("radius", 0.3))
        center = params.get("center", tuple(0.5 * l for l in grid.extents))
        coords = grid.meshgrid(_origin(params, grid, default_centered=False))
        dist2 = np.zeros(grid.dims)
        for x, c in zip(coords, center):
            dist2 = dist2 + (x - float(c)) ** 2
        arg = (np.sqrt(dist2) - r0) / (math.sqrt(2.0) * eps)
        return Field(grid, np.tanh(arg))

    if name == "two_spheres_tanh":
        eps = float(params["epsilon"])
        r0 = float(params.get("radius", 0.14))
        centers = params.get(
            "centers", ((0.5, 0.4, 0.5)[: grid.ndim], (0.5, 0.7, 0.5)[: grid.ndim])
        )
        coords = grid.meshgrid(_origin(params, grid, default_centered=False))
        values = np.ones(grid.dims)
        for center in centers:
            dist2 = np.zeros(grid.dims)
            for x, c in zip(coords, center):
                dist2 = dist2 + (x - float(c)) ** 2
            values = values - np.tanh(
                (np.sqrt(dist2) - r0) / (math.sqrt(2.0) * eps)
            )
        return Field(grid, values)

    if name == "random_uniform":
        amp = float(params.get("amplitude", 0.05))
        noise = _rng(seed).uniform(-1.0, 1.0, size=grid.dims)
        return Field(grid, amp * noise)

    # pfc_random
    mean = float(params.get("mean", 0.0))
    amp = float(params.get("amplitude", 0.01))
    noise = amp * _rng(seed).uniform(-1.0, 1.0, size=grid.dims)
    noise -= noise.mean()
    return Field(grid, mean + noise)
