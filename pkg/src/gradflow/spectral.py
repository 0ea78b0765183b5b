"""Periodic tensor grids, real FFT transforms, and diagonal Fourier operators.

Everything downstream (models, time steppers, diagnostics) is built on the
three types defined here: a grid, a real-valued field sampled on it, and a
Fourier multiplier (an operator diagonal in the discrete Fourier basis,
stored as one real symbol value per retained rfft mode).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

Array = np.ndarray

# Relative floor below which a multiplier counts as singular.
INVERTIBILITY_FLOOR = 1e-14


class GridMismatchError(ValueError):
    """Operands sampled on different grids."""


class SingularMultiplierError(ValueError):
    """Diagonal solve requested with a symbol that has (near-)zero modes."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic tensor grid, 1 to 3 axes.

    ``dims[i]`` nodes cover ``[0, extents[i])`` with spacing
    ``extents[i] / dims[i]``; node ``j`` sits at ``j * spacing[i]``.
    Wavenumbers follow ``k_i = 2*pi*m_i / extents[i]`` for integer mode
    index ``m_i``, so an extent of ``2*pi`` gives integer wavenumbers.
    """

    dims: tuple[int, ...]
    extents: tuple[float, ...]

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(l / n for l, n in zip(self.extents, self.dims))

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.dims))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def mode_shape(self) -> tuple[int, ...]:
        """Shape of the rfftn coefficient array (last axis halved)."""
        return self.dims[:-1] + (self.dims[-1] // 2 + 1,)

    def axis_coords(self, origin: tuple[float, ...] | None = None) -> list[Array]:
        """Per-axis node coordinates, shifted by ``origin`` when given."""
        if origin is None:
            origin = (0.0,) * self.ndim
        if len(origin) != self.ndim:
            raise ValueError(f"origin needs {self.ndim} entries, got {len(origin)}")
        return [
            o + np.arange(n) * (l / n)
            for o, n, l in zip(origin, self.dims, self.extents)
        ]

    def meshgrid(self, origin: tuple[float, ...] | None = None) -> list[Array]:
        return np.meshgrid(*self.axis_coords(origin), indexing="ij", sparse=False)


def make_grid(dims: list[int] | tuple[int, ...], extents: list[float] | tuple[float, ...]) -> GridSpec:
    """Validate and build a :class:`GridSpec`.

    Dims must be even and at least 4 (real-transform symmetry needs an even
    point count; fewer than 4 points cannot carry a signed mode pair).
    """
    dims = tuple(int(d) for d in dims)
    extents = tuple(float(l) for l in extents)
    if not 1 <= len(dims) <= 3:
        raise ValueError(f"grid must have 1-3 axes, got {len(dims)}")
    if len(extents) != len(dims):
        raise ValueError("dims and extents must have matching length")
    for d in dims:
        if d < 4 or d % 2 != 0:
            raise ValueError(f"grid dims must be even and >= 4, got {d}")
    for l in extents:
        if not l > 0:
            raise ValueError(f"extents must be positive, got {l}")
    return GridSpec(dims, extents)


@dataclass(frozen=True)
class Field:
    """Real scalar samples on a grid, row-major, finite everywhere."""

    grid: GridSpec
    values: Array

    def __post_init__(self):
        if self.values.shape != self.grid.dims:
            raise ValueError(
                f"field shape {self.values.shape} does not match grid dims {self.grid.dims}"
            )
        if not np.isfinite(self.values).all():
            raise ValueError("field contains non-finite values")

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())


def make_field(grid: GridSpec, values: Array) -> Field:
    return Field(grid, np.asarray(values, dtype=np.float64))


def constant_field(grid: GridSpec, value: float) -> Field:
    return Field(grid, np.full(grid.dims, float(value)))


@dataclass(frozen=True)
class FourierMultiplier:
    """Diagonal operator in rfftn space: one real symbol value per mode."""

    grid: GridSpec
    symbol: Array

    def __post_init__(self):
        if self.symbol.shape != self.grid.mode_shape:
            raise ValueError(
                f"symbol shape {self.symbol.shape} does not match mode layout {self.grid.mode_shape}"
            )

    @property
    def invertible(self) -> bool:
        sym = np.abs(self.symbol)
        return bool(sym.min() > INVERTIBILITY_FLOOR * max(1.0, sym.max()))


@lru_cache(maxsize=64)
def wavenumber_meshes(grid: GridSpec) -> tuple[Array, ...]:
    """Per-axis wavenumber arrays broadcast over the rfft mode layout."""
    axes = []
    for i, (n, l) in enumerate(zip(grid.dims, grid.extents)):
        if i == grid.ndim - 1:
            k = 2.0 * np.pi * np.fft.rfftfreq(n, d=l / n)
        else:
            k = 2.0 * np.pi * np.fft.fftfreq(n, d=l / n)
        shape = [1] * grid.ndim
        shape[i] = -1
        axes.append(k.reshape(shape))
    return tuple(axes)


@lru_cache(maxsize=64)
def squared_wavenumber(grid: GridSpec) -> Array:
    k2 = np.zeros(grid.mode_shape)
    for k in wavenumber_meshes(grid):
        k2 = k2 + k * k
    return k2


def multiplier_from_symbol(grid: GridSpec, symbol: Array) -> FourierMultiplier:
    return FourierMultiplier(grid, np.asarray(symbol, dtype=np.float64))


def laplacian_symbol(grid: GridSpec) -> FourierMultiplier:
    """Symbol of the Laplacian: -|k|^2."""
    return multiplier_from_symbol(grid, -squared_wavenumber(grid))


def identity_symbol(grid: GridSpec, scale: float = 1.0) -> FourierMultiplier:
    return multiplier_from_symbol(grid, np.full(grid.mode_shape, float(scale)))


@lru_cache(maxsize=64)
def dealias_mask(grid: GridSpec) -> Array:
    """Boolean 2/3-rule mask over the rfft mode layout (True = keep)."""
    keep = np.ones(grid.mode_shape, dtype=bool)
    for i, (n, l) in enumerate(zip(grid.dims, grid.extents)):
        if i == grid.ndim - 1:
            k = 2.0 * np.pi * np.fft.rfftfreq(n, d=l / n)
        else:
            k = 2.0 * np.pi * np.fft.fftfreq(n, d=l / n)
        kcut = (2.0 / 3.0) * np.abs(k).max()
        shape = [1] * grid.ndim
        shape[i] = -1
        keep &= (np.abs(k) <= kcut).reshape(shape)
    return keep


# Raw-array transform helpers.  The public API below wraps them in Field
# checks; the time steppers call these directly in their inner loops.

def rfft(grid: GridSpec, values: Array) -> Array:
    return np.fft.rfftn(values)

def irfft(grid: GridSpec, modes: Array) -> Array:
    return np.fft.irfftn(modes, s=grid.dims, axes=tuple(range(grid.ndim)))


def forward_transform(f: Field) -> Array:
    """rfftn coefficients of a field (unnormalised forward transform)."""
    return rfft(f.grid, f.values)


def inverse_transform(grid: GridSpec, modes: Array) -> Field:
    """Inverse of :func:`forward_transform`; rounds back to a real field."""
    return Field(grid, irfft(grid, modes))


def transform_roundtrip(f: Field) -> Field:
    """inverse(forward(f)); equals ``f`` to ~1e-13 relative max-norm."""
    return inverse_transform(f.grid, forward_transform(f))


def apply_multiplier(f: Field, m: FourierMultiplier) -> Field:
    """Apply a diagonal operator: inverse(symbol * forward(f))."""
    if f.grid != m.grid:
        raise GridMismatchError("field and multiplier live on different grids")
    return Field(f.grid, irfft(f.grid, m.symbol * rfft(f.grid, f.values)))


def solve_diagonal(rhs: Field, a: FourierMultiplier) -> Field:
    """Solve ``a * u = rhs`` mode by mode; ``a`` must be invertible."""
    if rhs.grid != a.grid:
        raise GridMismatchError("field and multiplier live on different grids")
    if not a.invertible:
        sym = np.abs(a.symbol)
        worst = np.unravel_index(int(sym.argmin()), sym.shape)
        raise SingularMultiplierError(
            f"multiplier is not invertible: |symbol|={a.symbol[worst]:.3e} at mode {worst}"
        )
    return Field(rhs.grid, irfft(rhs.grid, rfft(rhs.grid, rhs.values) / a.symbol))


def inner_product(f: Field, g: Field) -> float:
    """Periodic trapezoid rule for the L2 pairing: prod(h) * sum(f*g)."""
    if f.grid != g.grid:
        raise GridMismatchError("fields live on different grids")
    return f.grid.cell_volume * float(np.dot(f.values.ravel(), g.values.ravel()))


def integral(f: Field) -> float:
    """Periodic trapezoid rule for ``integral of f over the domain``."""
    return f.grid.cell_volume * float(f.values.sum())
