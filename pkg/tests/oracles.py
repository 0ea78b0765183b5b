"""Independent oracles shared by the unit and acceptance tests.

Everything here deliberately avoids the library's own fast paths: scalar
roots come from dense scans plus bisection, integrals from plain node sums,
gradients from hand-built spectral derivatives.
"""

from __future__ import annotations

import numpy as np


def factor_balance(p, s0, s1, multiplicity, drift):
    return (1.0 + p) * (s0 + multiplicity * p * s1) - drift


def scan_bisect_roots(func, lo: float, hi: float, samples: int, iters: int = 200):
    """All roots of ``func`` found by a sign-change scan plus bisection."""
    xs = np.linspace(lo, hi, samples)
    ys = func(xs)
    roots = [float(x) for x in xs[ys == 0.0]]
    brackets = np.nonzero(ys[:-1] * ys[1:] < 0.0)[0]
    for i in brackets:
        a, b = float(xs[i]), float(xs[i + 1])
        fa = float(func(np.array([a]))[0])
        for _ in range(iters):
            mid = 0.5 * (a + b)
            fm = float(func(np.array([mid]))[0])
            if fa * fm <= 0.0:
                b = mid
            else:
                a, fa = mid, fm
        roots.append(0.5 * (a + b))
    return roots


def balance_roots(s0, s1, multiplicity, drift, lo=-2e3, hi=2e3,
                  samples=400_000):
    """All roots of the scalar balance equation inside the scan window."""
    return scan_bisect_roots(
        lambda p: factor_balance(p, s0, s1, multiplicity, drift), lo, hi, samples
    )


def min_abs_root_of_balance(s0, s1, multiplicity, drift, lo=-2e3, hi=2e3,
                            samples=400_000):
    """Min-|p| root of the scalar balance equation, or None."""
    roots = balance_roots(s0, s1, multiplicity, drift, lo, hi, samples)
    if not roots:
        return None
    return min(roots, key=abs)


def run_scan_oracle_comparison(n_instances: int, seed: int) -> tuple[int, int]:
    """Compare the quadratic factor solver against the scan+bisect oracle.

    Draws random scalar balance instances, solves them through the library
    path, and checks the selected factor value (or the degraded branch)
    against the independently found roots.  Instances whose roots fall
    outside the scan window, too close to resolve, or right on the
    admissibility boundary are redrawn.  Returns (checked, skipped).
    """
    from gradflow.factors import AffineFactor, assemble_quadratic, solve_zero_factor

    rng = np.random.default_rng(seed)
    checked = skipped = 0
    while checked < n_instances:
        s0, s1, drift = rng.uniform(-2, 2, size=3)
        slope = rng.uniform(0.2, 2.0) * rng.choice([-1.0, 1.0])
        offset = rng.uniform(-1.0, 1.0)
        mult = int(rng.choice([1, 3]))
        form = AffineFactor(slope, offset)
        q = assemble_quadratic(s0, s1, drift, form, mult)
        u, p, branch = solve_zero_factor(q, form, drift, s0, s1, mult)
        roots = balance_roots(s0, s1, mult, drift)
        if any(abs(r) > 1e3 - 1 for r in roots):
            skipped += 1
            continue
        if any(abs(abs(r + 1.0) - 0.5) < 1e-6 for r in roots):
            skipped += 1  # admissibility boundary: tie-break not comparable
            continue
        disc = q.b * q.b - 4 * q.a * q.c
        if disc > 0 and abs(q.a) > 1e-12 and np.sqrt(disc) / abs(q.a) < 0.05:
            skipped += 1  # double-ish root, below scan resolution
            continue
        admissible = [r for r in roots if abs(r + 1.0) >= 0.5]
        if abs(drift) < 1e-15:
            assert branch == "fallback" and p == 0.0
        elif not admissible:
            assert branch == "frozen" and p == -1.0
        else:
            expected = min(admissible, key=abs)
            assert branch in ("quadratic", "linear")
            assert abs(p - expected) <= 1e-9 * max(1.0, abs(expected))
        checked += 1
    return checked, skipped


def brute_force_min_lambda(r_tilde, f_int, dissipation, kappa_max,
                           grid_step=1e-3):
    """Smallest feasible relaxation weight found by scanning a lambda grid.

    Feasibility of lambda: exists kappa in [0, kappa_max] with
    (r_tilde - f_int) * lambda <= (r_tilde - f_int) + kappa * dissipation.
    The weakest constraint uses kappa = kappa_max.
    """
    lams = np.arange(0.0, 1.0 + grid_step / 2, grid_step)
    gap = r_tilde - f_int
    feasible = gap * lams <= gap + kappa_max * dissipation + 1e-15
    idx = np.argmax(feasible)
    if not feasible[idx]:
        return None
    return float(lams[idx])


def node_sum_integral(values: np.ndarray, spacings) -> float:
    """Plain accumulated node sum times the cell volume."""
    total = 0.0
    for v in values.ravel().tolist():
        total += v
    vol = 1.0
    for h in spacings:
        vol *= h
    return total * vol


def spectral_gradient_squared(values: np.ndarray, extents) -> np.ndarray:
    """|grad f|^2 via hand-built full-complex spectral derivatives."""
    fh = np.fft.fftn(values)
    out = np.zeros_like(values)
    for axis, (n, l) in enumerate(zip(values.shape, extents)):
        k = 2.0 * np.pi * np.fft.fftfreq(n, d=l / n)
        shape = [1] * values.ndim
        shape[axis] = -1
        df = np.fft.ifftn(1j * k.reshape(shape) * fh).real
        out = out + df * df
    return out


def band_limited_random(dims, seed: int, scale: float = 1.0) -> np.ndarray:
    """Random field with the Nyquist planes removed.

    Spectral differentiation drops the Nyquist mode of a real field, so
    identities that compare (phi, -Lap phi) with the integral of
    |grad phi|^2 only hold below Nyquist.
    """
    rng = np.random.default_rng(seed)
    values = scale * rng.standard_normal(dims)
    fh = np.fft.fftn(values)
    for axis, n in enumerate(dims):
        index = [slice(None)] * len(dims)
        index[axis] = n // 2
        fh[tuple(index)] = 0.0
    return np.fft.ifftn(fh).real


def heat_exact(values0: np.ndarray, extents, t: float) -> np.ndarray:
    """Exact solution of u_t = Lap u with periodic data."""
    fh = np.fft.fftn(values0)
    k2 = np.zeros(values0.shape)
    for axis, (n, l) in enumerate(zip(values0.shape, extents)):
        k = 2.0 * np.pi * np.fft.fftfreq(n, d=l / n)
        shape = [1] * values0.ndim
        shape[axis] = -1
        k2 = k2 + (k.reshape(shape)) ** 2
    return np.fft.ifftn(np.exp(-k2 * t) * fh).real


def semi_implicit_bdf2_heat(values0: np.ndarray, extents, dt: float,
                            n_steps: int) -> np.ndarray:
    """Plain semi-implicit BDF2 for u_t = Lap u, midpoint first step."""
    fh0 = np.fft.fftn(values0)
    k2 = np.zeros(values0.shape)
    for axis, (n, l) in enumerate(zip(values0.shape, extents)):
        k = 2.0 * np.pi * np.fft.fftfreq(n, d=l / n)
        shape = [1] * values0.ndim
        shape[axis] = -1
        k2 = k2 + (k.reshape(shape)) ** 2
    prev = fh0
    cur = fh0 * (1.0 - 0.5 * dt * k2) / (1.0 + 0.5 * dt * k2)
    for _ in range(n_steps - 1):
        cur, prev = (4.0 * cur - prev) / (3.0 + 2.0 * dt * k2), cur
    return np.fft.ifftn(cur).real
