"""Leapfrog simulation of the 1D wave equation on (0, L).

``z = 0`` at ``x = 0`` and ``dz/dx = u`` at ``x = L``, with ``u`` a held
boundary control ``-alpha(L) * v_hold``.

Energy, the multiplier integral ``rho`` and ``V = E + eps*rho`` are evaluated
on the staggered pair ``(z_prev, z_curr)``, i.e. at ``t - dt/2``. With these
discrete forms the scheme satisfies exactly

    E(next) - E(curr) = dt * u * v_L,

with ``v_L`` the centred boundary velocity at ``t``, and the bound
``|rho| <= 2 R E`` holds to round-off. Continuous damping is therefore
dissipative to machine precision.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
import math

import numpy as np

N_DIM = 1  # spatial dimension of the simulated problem


@dataclass(frozen=True)
class Grid1D:
    num_nodes: int
    dt: float
    length: float = math.pi

    def __post_init__(self):
        if self.num_nodes < 3:
            raise ValueError("need at least 3 nodes")
        if not (self.dt > 0 and self.length > 0):
            raise ValueError("dt and length must be positive")
        if self.cfl > 1.0 + 1e-12:
            raise ValueError(f"CFL number {self.cfl:.6g} exceeds 1")

    @classmethod
    def uniform(cls, n_cells: int, cfl: float = 0.9, length: float = math.pi,
                horizon: float | None = None) -> "Grid1D":
        """Grid with ``n_cells`` intervals; when ``horizon`` is given, ``dt`` is
        shrunk so an integer number of steps lands exactly on it."""
        dx = length / n_cells
        dt = cfl * dx
        if horizon is not None:
            dt = horizon / math.ceil(horizon / dt - 1e-9)
        return cls(n_cells + 1, dt, length)

    @property
    def n_cells(self) -> int:
        return self.num_nodes - 1

    @property
    def dx(self) -> float:
        return self.length / self.n_cells

    @property
    def cfl(self) -> float:
        return self.dt / self.dx

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.num_nodes)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid weights."""
        w = np.full(self.num_nodes, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w


@dataclass(frozen=True)
class BoundaryControlContext:
    alpha_at_gamma1: float
    x0: float = -1.0
    v_hold: float = 0.0

    @classmethod
    def for_problem(cls, alpha1: float, x0: float = -1.0, length: float = math.pi,
                    v_hold: float = 0.0) -> "BoundaryControlContext":
        if not x0 < length:
            raise ValueError("x0 must lie left of the controlled end")
        return cls(alpha1 * (length - x0), x0, v_hold)

    @property
    def u(self) -> float:
        return -self.alpha_at_gamma1 * self.v_hold


@dataclass(frozen=True)
class WaveState:
    """Two time levels of the discrete field.

    ``v`` is the centred velocity at ``t`` under the control ``u_held``.
    """

    t: float
    z_curr: np.ndarray
    z_prev: np.ndarray
    v: np.ndarray
    u_held: float = 0.0


class CompatibilityError(ValueError):
    pass


def _sample(profile, x):
    if callable(profile):
        vals = np.asarray(profile(x), dtype=float)
    else:
        vals = np.asarray(profile, dtype=float)
    return np.broadcast_to(vals, x.shape).astype(float).copy()


def laplacian(z: np.ndarray, grid: Grid1D, u: float) -> np.ndarray:
    """Discrete Laplacian with the Dirichlet and ghost-node Neumann closures."""
    dx2 = grid.dx ** 2
    lap = np.zeros_like(z)
    lap[1:-1] = (z[2:] - 2 * z[1:-1] + z[:-2]) / dx2
    # ghost node z_{N+1} = z_{N-1} + 2 dx u
    lap[-1] = (2 * z[-2] - 2 * z[-1] + 2 * grid.dx * u) / dx2
    return lap


def velocity(z_curr, z_prev, grid: Grid1D, u: float) -> np.ndarray:
    """Centred velocity ``(z+ - z-) / 2dt``, written without ``z+``."""
    v = (z_curr - z_prev) / grid.dt + 0.5 * grid.dt * laplacian(z_curr, grid, u)
    v[0] = 0.0
    return v


def init(grid: Grid1D, z0, z1, u0: float = 0.0) -> WaveState:
    """Sample the initial data and build the Taylor start ``z(-dt)``.

    ``u0`` is the boundary datum used in the start-up Laplacian; pass the
    control that will be applied on the first interval.
    """
    x = grid.x
    zc = _sample(z0, x)
    v = _sample(z1, x)
    if abs(zc[0]) > 1e-12 or abs(v[0]) > 1e-12:
        raise CompatibilityError("initial data must vanish at x = 0")
    zc[0] = 0.0
    v[0] = 0.0
    dt = grid.dt
    zp = zc - dt * v + 0.5 * dt ** 2 * laplacian(zc, grid, u0)
    zp[0] = 0.0
    return WaveState(0.0, zc, zp, v, u0)


def boundary_velocity(state: WaveState, grid: Grid1D, u: float) -> float:
    """Centred velocity at ``x = L`` if control ``u`` is applied at ``state.t``."""
    dt, dx = grid.dt, grid.dx
    zc, zp = state.z_curr, state.z_prev
    return (zc[-1] - zp[-1]) / dt + dt * (zc[-2] - zc[-1]) / dx ** 2 + grid.cfl * u


def latched_velocity(state: WaveState, grid: Grid1D, alpha_at_gamma1: float) -> float:
    """Boundary velocity consistent with the control it generates.

    Solves ``v = boundary_velocity(state, u=-alpha v)``; the result is the
    right limit of dz/dt at the update instant, so the deviation restarts at 0.
    """
    v0 = boundary_velocity(state, grid, 0.0)
    return v0 / (1.0 + grid.cfl * alpha_at_gamma1)


def with_control(state: WaveState, grid: Grid1D, ctx: BoundaryControlContext) -> WaveState:
    """Re-evaluate ``v`` after the held control changed at ``state.t``."""
    u = ctx.u
    return replace(state, v=velocity(state.z_curr, state.z_prev, grid, u), u_held=u)


def step(state: WaveState, grid: Grid1D, ctx: BoundaryControlContext) -> WaveState:
    u = ctx.u
    zc, zp = state.z_curr, state.z_prev
    zn = 2 * zc - zp + grid.dt ** 2 * laplacian(zc, grid, u)
    zn[0] = 0.0
    return WaveState(state.t + grid.dt, zn, zc, velocity(zn, zc, grid, u), u)


def _half_level(state: WaveState, grid: Grid1D):
    d = (state.z_curr - state.z_prev) / grid.dt
    zbar = 0.5 * (state.z_curr + state.z_prev)
    return d, zbar


def energy(state: WaveState, grid: Grid1D) -> float:
    """Discrete ``1/2 |dz/dx|^2 + 1/2 |dz/dt|^2`` conserved by leapfrog."""
    d, zbar = _half_level(state, grid)
    dx = grid.dx
    kin = 0.5 * np.dot(grid.weights, d * d) - grid.dt ** 2 / 8 * np.sum(np.diff(d) ** 2) / dx
    pot = 0.5 * np.sum(np.diff(zbar) ** 2) / dx
    return float(kin + pot)


def rho(state: WaveState, grid: Grid1D, ctx: BoundaryControlContext) -> float:
    """``int (2 (x - x0) dz/dx + (n-1) z) dz/dt`` with edge-centred quadrature."""
    d, zbar = _half_level(state, grid)
    x = grid.x
    xm = 0.5 * (x[1:] + x[:-1])
    d_edge = 0.5 * (d[1:] + d[:-1])
    z_edge = 0.5 * (zbar[1:] + zbar[:-1])
    integrand = 2 * (xm - ctx.x0) * np.diff(zbar) / grid.dx + (N_DIM - 1) * z_edge
    return float(np.sum(integrand * d_edge) * grid.dx)


def lyapunov(state: WaveState, grid: Grid1D, ctx: BoundaryControlContext, eps: float) -> float:
    return energy(state, grid) + eps * rho(state, grid, ctx)


def position_error(state: WaveState, grid: Grid1D, exact) -> float:
    """Max nodal error of ``z_curr`` against ``exact(t, x)``."""
    return float(np.max(np.abs(state.z_curr - exact(state.t, grid.x))))
