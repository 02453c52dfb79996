"""Stability certificates for event-triggered boundary damping of the wave equation.

A certificate is a multiplier triple ``(eps, lambda1, lambda2)`` for which

* ``0 < eps < 1 / (2R + (n-1) C)``,
* the scalar gap ``-eps + lambda1*gamma/2 + lambda2*C*(R + n*C)`` is negative,
* the 4x4 matrix ``M`` built by :func:`build_M` is negative definite.

Feasible certificates carry an exponential rate bound ``delta_max`` and the
level ``r`` of the Lyapunov sublevel set that trajectories are driven into.
"""
from __future__ import annotations

from dataclasses import dataclass, field, asdict
from enum import Enum
import math

import numpy as np

from .symmat import (
    MINOR_TOL,
    SymMatrix,
    eigenvalues_sym,
    is_negative_definite,
    is_negative_definite_eig,
    leading_minors,
)


def _finite(*vals):
    return all(math.isfinite(v) for v in vals)


@dataclass(frozen=True)
class ProblemData:
    """Geometry, damping gain and trigger tuning.

    ``R`` is the largest distance from the observation point ``x0`` to the
    controlled boundary, ``c_omega`` the Poincare constant of the domain.
    Construction only rejects structurally meaningless data; whether the
    strict hypotheses hold (``alpha1, gamma, nu0, c_omega > 0``) is reported
    by :attr:`admissible`, and certify/synthesize return infeasible otherwise.
    """

    n: int = 1
    R: float = math.pi + 1.0
    c_omega: float = 0.5
    alpha1: float = 0.1
    gamma: float = 0.2
    nu0: float = 0.1

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if not _finite(self.R, self.c_omega, self.alpha1, self.gamma, self.nu0):
            raise ValueError("problem data must be finite")
        if self.R <= 0:
            raise ValueError("R must be positive")
        if self.c_omega < 0 or self.gamma < 0 or self.nu0 < 0:
            raise ValueError("c_omega, gamma and nu0 must be nonnegative")

    @property
    def admissible(self) -> bool:
        return self.alpha1 > 0 and self.gamma > 0 and self.nu0 > 0 and self.c_omega > 0

    @property
    def c_tilde(self) -> float:
        """Constant in ``|V - E| <= eps * c_tilde * E``."""
        return 2.0 * self.R + (self.n - 1) * self.c_omega

    def replace(self, **kw) -> "ProblemData":
        return ProblemData(**{**asdict(self), **kw})


@dataclass(frozen=True)
class Multipliers:
    eps: float
    lambda1: float
    lambda2: float

    def __post_init__(self):
        if not _finite(self.eps, self.lambda1, self.lambda2):
            raise ValueError("multipliers must be finite")

    @property
    def positive(self) -> bool:
        return self.eps > 0 and self.lambda1 > 0 and self.lambda2 > 0


def poincare_constant_1d(a: float, b: float) -> float:
    """Wirtinger-type constant ``(b - a) / (2 pi)`` used as the 1D default."""
    return (b - a) / (2.0 * math.pi)


def beta(pd: ProblemData) -> float:
    """Trace-inequality constant ``R C + n C^2``."""
    return pd.R * pd.c_omega + pd.n * pd.c_omega ** 2


def build_M(pd: ProblemData, m: Multipliers) -> SymMatrix:
    """LMI matrix on the boundary trace ``(z, (x-x0).grad z, dz/dt, e_k)``."""
    n, R, a1 = pd.n, pd.R, pd.alpha1
    eps, l1, l2 = m.eps, m.lambda1, m.lambda2
    h = (n - 1) * a1 * eps / 2.0
    return SymMatrix(4, (
        -l2, 0.0, -h, h,
        -eps / R ** 2, -a1 * eps, a1 * eps,
        eps - a1, a1 / 2.0,
        -l1 / R,
    ))


def build_M1(pd: ProblemData, m: Multipliers) -> SymMatrix:
    """``M`` restricted to the kernel of its first-row multiplier (rows 2-4)."""
    R, a1, eps = pd.R, pd.alpha1, m.eps
    return SymMatrix(3, (
        -eps / R ** 2, -a1 * eps, a1 * eps,
        eps - a1, a1 / 2.0,
        -m.lambda1 / R,
    ))


def build_M3(pd: ProblemData, eps: float) -> SymMatrix:
    R, a1 = pd.R, pd.alpha1
    return SymMatrix(2, (-eps / R ** 2, -a1 * eps, eps - a1))


def scalar_gap(pd: ProblemData, m: Multipliers) -> float:
    return -m.eps + m.lambda1 * pd.gamma / 2.0 + m.lambda2 * pd.c_omega * (pd.R + pd.n * pd.c_omega)


def eps_upper_lyapunov(pd: ProblemData) -> float:
    """Largest eps keeping V equivalent to E."""
    return 1.0 / pd.c_tilde


def eps_upper_m3(pd: ProblemData) -> float:
    return pd.alpha1 / (1.0 + pd.alpha1 ** 2 * pd.R ** 2)


def eps_window(pd: ProblemData) -> tuple[float, float]:
    """Open interval ``(0, e_hi)`` of admissible eps; empty when ``e_hi <= 0``."""
    return 0.0, min(eps_upper_lyapunov(pd), eps_upper_m3(pd))


def m3_feasible(pd: ProblemData, eps: float) -> bool:
    return eps > 0 and eps - pd.alpha1 + pd.alpha1 ** 2 * eps * pd.R ** 2 < 0


def finsler_equivalent(pd: ProblemData, m: Multipliers) -> bool:
    """Negative definiteness of the reduced matrix ``M1``.

    For ``n == 1`` the first row of ``M`` decouples, so ``M < 0`` iff
    ``lambda2 > 0`` and ``M1 < 0``.
    """
    return is_negative_definite(build_M1(pd, m))


def delta_max(pd: ProblemData, m: Multipliers) -> float:
    """Supremum of certified decay rates; NaN when the preconditions fail."""
    g = scalar_gap(pd, m)
    if not (g < 0 and m.eps < eps_upper_lyapunov(pd)):
        return math.nan
    return -g / (1.0 + m.eps * pd.c_tilde)


def radius(pd: ProblemData, m: Multipliers, delta: float) -> float:
    """Attractor level ``r`` for a decay rate ``0 < delta < delta_max``."""
    dm = delta_max(pd, m)
    if not (dm > 0 and 0 < delta < dm):
        return math.nan
    denom = (2 * m.eps - m.lambda1 * pd.gamma
             - 2 * m.lambda2 * pd.c_omega * (pd.R + pd.n * pd.c_omega)) / (1 + m.eps * pd.c_tilde) - 2 * delta
    return m.lambda1 * pd.nu0 / denom


@dataclass
class Certificate:
    feasible: bool
    eps: float
    lambda1: float
    lambda2: float
    scalar_gap: float
    delta_max: float
    delta_used: float
    radius: float | None
    eps_window_hi: float
    M_eigenvalues: list[float]
    M_minors: list[float] = field(default_factory=list)
    lmi_minor_verdict: bool = False
    lmi_eigen_verdict: bool = False
    failed_checks: list[str] = field(default_factory=list)
    theta: float | None = None
    radius_proof_step: float | None = None

    @property
    def multipliers(self) -> Multipliers:
        return Multipliers(self.eps, self.lambda1, self.lambda2)

    def to_json_dict(self) -> dict:
        def clean(v):
            if isinstance(v, float) and not math.isfinite(v):
                return None
            if isinstance(v, list):
                return [clean(u) for u in v]
            return v
        return {k: clean(v) for k, v in asdict(self).items()}


def certify(pd: ProblemData, m: Multipliers, delta: float | None = None,
            theta: float | None = None) -> Certificate:
    """Check the three conditions and fill in rate and radius.

    ``delta`` defaults to ``delta_max / 2``. Passing ``theta`` selects the
    exponentially vanishing threshold ``eps0 * exp(-2 theta t)``: the rate is
    then also capped by ``theta`` and there is no attractor radius.
    """
    M = build_M(pd, m)
    eig = eigenvalues_sym(M)
    minors = leading_minors(M)
    nd_minor = is_negative_definite(M)
    nd_eig = is_negative_definite_eig(M)
    gap = scalar_gap(pd, m)
    failed = []
    if not m.positive:
        failed.append("multipliers_positive")
    if not m.eps < eps_upper_lyapunov(pd):
        failed.append("eps_bound")
    if not gap < 0:
        failed.append("scalar_gap")
    if not nd_minor:
        failed.append("lmi")
    if not pd.admissible:
        failed.append("problem_admissible")
    if theta is not None and not theta > 0:
        failed.append("theta_positive")
    feasible = not failed
    dm = delta_max(pd, m) if feasible else math.nan
    ceiling = min(dm, theta) if theta is not None and feasible else dm
    if delta is None:
        delta = ceiling / 2 if feasible else math.nan
    r = None
    r_step = None
    if feasible:
        if not 0 < delta < ceiling:
            raise ValueError(f"delta={delta} outside (0, {ceiling})")
        if theta is None:
            r = radius(pd, m, delta)
            r_step = m.lambda1 * pd.nu0 / 2 / (gap / (1 + m.eps * pd.c_tilde) + delta)
    return Certificate(
        feasible=feasible,
        eps=m.eps, lambda1=m.lambda1, lambda2=m.lambda2,
        scalar_gap=gap,
        delta_max=dm,
        delta_used=delta,
        radius=r,
        eps_window_hi=eps_window(pd)[1],
        M_eigenvalues=eig,
        M_minors=minors,
        lmi_minor_verdict=nd_minor,
        lmi_eigen_verdict=nd_eig,
        failed_checks=failed,
        theta=theta,
        radius_proof_step=r_step,
    )


class Objective(str, Enum):
    MAXIMIZE_DELTA = "delta"
    MINIMIZE_RADIUS = "radius"


GRID_POINTS = 64
LAMBDA2_FLOOR = 1e-6


def _m_stack(pd, eps, l1, l2):
    """Stack of M matrices over broadcast multiplier arrays, shape (..., 4, 4)."""
    eps, l1, l2 = np.broadcast_arrays(eps, l1, l2)
    n, R, a1 = pd.n, pd.R, pd.alpha1
    M = np.zeros(eps.shape + (4, 4))
    h = (n - 1) * a1 * eps / 2
    M[..., 0, 0] = -l2
    M[..., 0, 2] = M[..., 2, 0] = -h
    M[..., 0, 3] = M[..., 3, 0] = h
    M[..., 1, 1] = -eps / R ** 2
    M[..., 1, 2] = M[..., 2, 1] = -a1 * eps
    M[..., 1, 3] = M[..., 3, 1] = a1 * eps
    M[..., 2, 2] = eps - a1
    M[..., 2, 3] = M[..., 3, 2] = a1 / 2
    M[..., 3, 3] = -l1 / R
    return M


def _nd_stack(M):
    """Vectorised twin of :func:`is_negative_definite` (same minor rule)."""
    s = np.abs(M).max(axis=(-2, -1))
    ok = s > 0
    for k in range(1, M.shape[-1] + 1):
        mk = np.linalg.det(M[..., :k, :k])
        ok &= (-1) ** k * mk > MINOR_TOL * s ** k
    return ok


def _objective_values(pd, eps, l1, l2, objective, delta):
    gap = -eps + l1 * pd.gamma / 2 + l2 * pd.c_omega * (pd.R + pd.n * pd.c_omega)
    feas = (gap < 0) & (eps < eps_upper_lyapunov(pd)) & (eps > 0) & (l1 > 0) & (l2 > 0)
    feas &= _nd_stack(_m_stack(pd, eps, l1, l2))
    dm = -gap / (1 + eps * pd.c_tilde)
    if objective is Objective.MAXIMIZE_DELTA:
        val = dm
    else:
        feas &= dm > delta
        val = -l1 * pd.nu0 / (2 * (dm - delta))
    return np.where(feas, val, -np.inf), gap


@dataclass
class SynthesisResult:
    multipliers: Multipliers | None
    certificate: Certificate | None
    objective: str
    evaluated: int
    near_miss: dict | None = None


def synthesize(pd: ProblemData, objective=Objective.MAXIMIZE_DELTA,
               delta: float | None = None, grid_points: int = GRID_POINTS) -> SynthesisResult:
    """Deterministic grid search over ``(eps, lambda1, lambda2)`` plus one
    round of coordinate refinement.

    For ``minimize_radius`` the rate ``delta`` at which the radius is
    evaluated is required. Returns an infeasible certificate, with the
    least-violating grid point, when the search box holds no feasible point.
    """
    objective = Objective(objective)
    if objective is Objective.MINIMIZE_RADIUS and not (delta is not None and delta > 0):
        raise ValueError("minimize_radius needs a positive delta")
    e_hi = eps_window(pd)[1]
    if not (e_hi > 0 and pd.admissible):
        return SynthesisResult(None, None, objective.value, 0,
                               near_miss={"reason": "empty eps window or inadmissible problem data",
                                          "eps_window_hi": e_hi})

    bprime = pd.c_omega * (pd.R + pd.n * pd.c_omega)
    eps_grid = e_hi * np.geomspace(1e-3, 1.0, grid_points + 1)[:-1]
    best = (-np.inf, None)
    miss = (np.inf, None)
    evaluated = 0
    for eps in eps_grid:
        lb = pd.R * pd.alpha1 ** 2 / (4 * (pd.alpha1 - eps))
        l1 = np.geomspace(lb, 1e3 * lb, grid_points + 1)[1:]
        ub2 = (eps - l1 * pd.gamma / 2) / bprime if bprime > 0 else np.full_like(l1, 1.0)
        t = np.linspace(0.0, 1.0, grid_points + 1)[:-1]
        # per-lambda1 log grid on [floor, ub2); rows with ub2 <= floor get no valid entries
        hi = np.maximum(ub2, LAMBDA2_FLOOR)
        l2 = LAMBDA2_FLOOR * (hi[:, None] / LAMBDA2_FLOOR) ** t[None, :]
        L1 = np.broadcast_to(l1[:, None], l2.shape)
        vals, gap = _objective_values(pd, eps, L1, l2, objective, delta)
        vals = np.where(ub2[:, None] > LAMBDA2_FLOOR, vals, -np.inf)
        evaluated += vals.size
        i, j = np.unravel_index(np.argmax(vals), vals.shape)
        if vals[i, j] > best[0]:
            best = (vals[i, j], (float(eps), float(l1[i]), float(l2[i, j])))
        if best[1] is None:
            M = _m_stack(pd, eps, L1, l2)
            viol = np.maximum(gap, np.linalg.eigvalsh(M)[..., -1])
            a, b = np.unravel_index(np.argmin(viol), viol.shape)
            if viol[a, b] < miss[0]:
                miss = (float(viol[a, b]), (float(eps), float(l1[a]), float(l2[a, b])))

    if best[1] is None:
        p = miss[1]
        m = Multipliers(*p)
        return SynthesisResult(m, certify(pd, m), objective.value, evaluated,
                               near_miss={"max_violation": miss[0], "point": p})

    point = list(best[1])
    f = lambda p: float(_objective_values(pd, np.float64(p[0]), np.float64(p[1]),
                                          np.float64(p[2]), objective, delta)[0])
    fbest = f(point)
    for k in range(3):
        for end in (point[k] / 1.2, point[k] * 1.2):
            cand, fc = _refine_coordinate(f, point, k, end)
            evaluated += 80
            if fc > fbest:
                point, fbest = cand, fc
    d_arg = delta if objective is Objective.MINIMIZE_RADIUS else None
    m = Multipliers(*point)
    cert = certify(pd, m, delta=d_arg)
    if not cert.feasible:
        m = Multipliers(*best[1])
        cert = certify(pd, m, delta=d_arg)
    return SynthesisResult(m, cert, objective.value, evaluated)


def _refine_coordinate(f, point, k, end, iters=20):
    """Bisect from ``point`` towards ``end`` along coordinate ``k`` to the
    feasibility frontier, then ternary-search the feasible segment."""
    def at(v):
        p = list(point)
        p[k] = v
        return p

    a, b = point[k], end
    if not math.isfinite(f(at(b))):
        for _ in range(iters):
            mid = 0.5 * (a + b)
            if math.isfinite(f(at(mid))):
                a = mid
            else:
                b = mid
        b = a
    lo, hi = sorted((point[k], b))
    for _ in range(iters):
        m1 = lo + (hi - lo) / 3
        m2 = hi - (hi - lo) / 3
        if f(at(m1)) < f(at(m2)):
            lo = m1
        else:
            hi = m2
    cands = [at(lo), at(hi), at(b)]
    vals = [f(c) for c in cands]
    i = int(np.argmax(vals))
    return cands[i], vals[i]
