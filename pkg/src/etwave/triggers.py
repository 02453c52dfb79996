"""Sampling policies deciding when the held boundary velocity is refreshed."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
import math

from .wavesim import BoundaryControlContext, Grid1D, WaveState, latched_velocity

# periodic instants k*tau are matched on a floating grid
_TIME_SLACK = 1e-9


@dataclass(frozen=True)
class Continuous:
    def label(self) -> str:
        return "continuous"


@dataclass(frozen=True)
class Frozen:
    def label(self) -> str:
        return "frozen"


@dataclass(frozen=True)
class Periodic:
    tau: float

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")

    def label(self) -> str:
        return f"periodic:{self.tau:g}"


@dataclass(frozen=True)
class EventStatic:
    """Update when ``w |v(t,L) - v_hold|^2 - gamma E - nu0 >= 0``."""

    gamma: float
    nu0: float
    weight: float = 1.0

    def __post_init__(self):
        if not (self.gamma > 0 and self.nu0 > 0 and self.weight > 0):
            raise ValueError("gamma, nu0 and weight must be positive")

    def threshold_offset(self, t: float) -> float:
        return self.nu0

    def label(self) -> str:
        return f"event:{self.gamma:g},{self.nu0:g}"


@dataclass(frozen=True)
class EventExpo:
    """Event rule with the offset ``nu0`` replaced by ``eps0 exp(-2 theta t)``."""

    eps0: float
    theta: float
    gamma: float = 0.2
    weight: float = 1.0

    def __post_init__(self):
        if not (self.eps0 > 0 and self.theta > 0 and self.gamma > 0 and self.weight > 0):
            raise ValueError("eps0, theta, gamma and weight must be positive")

    def threshold_offset(self, t: float) -> float:
        return self.eps0 * math.exp(-2.0 * self.theta * t)

    def label(self) -> str:
        return f"eventexp:{self.eps0:g},{self.theta:g}"


SamplingPolicy = Continuous | Frozen | Periodic | EventStatic | EventExpo


@dataclass
class EventLog:
    times: list[float] = field(default_factory=list)
    values: list[float] = field(default_factory=list)

    def __len__(self):
        return len(self.times)

    @property
    def gaps(self) -> list[float]:
        return [b - a for a, b in zip(self.times, self.times[1:])]

    @property
    def min_gap(self) -> float:
        g = self.gaps
        return min(g) if g else math.inf

    def rows(self):
        """``(k, t_k, v_hold, gap)``; the first gap is empty."""
        for k, (t, v) in enumerate(zip(self.times, self.values)):
            yield k, t, v, (t - self.times[k - 1]) if k else None


def trigger_value(state: WaveState, ctx: BoundaryControlContext, gamma: float, nu0: float,
                  E: float, weight: float = 1.0) -> float:
    """``w (v(t,L) - v_hold)^2 - gamma E - nu0``; an update is due when >= 0."""
    dev = state.v[-1] - ctx.v_hold
    return weight * dev * dev - gamma * E - nu0


def deviation(state: WaveState, ctx: BoundaryControlContext) -> float:
    return float(state.v[-1] - ctx.v_hold)


def policy_trigger_value(policy, t, state, ctx, E, gamma=0.2, nu0=0.1) -> float:
    """Trigger function of ``policy`` (the static rule with ``gamma, nu0`` for
    policies that do not define one)."""
    if isinstance(policy, (EventStatic, EventExpo)):
        return trigger_value(state, ctx, policy.gamma, policy.threshold_offset(t), E, policy.weight)
    return trigger_value(state, ctx, gamma, nu0, E)


def should_update(policy, t: float, state: WaveState, ctx: BoundaryControlContext,
                  E: float, log: EventLog) -> bool:
    if not log:
        return True  # t = 0 latches the initial velocity
    if t <= log.times[-1]:
        return False
    if isinstance(policy, Continuous):
        return True
    if isinstance(policy, Frozen):
        return False
    if isinstance(policy, Periodic):
        return t + _TIME_SLACK >= len(log) * policy.tau
    if isinstance(policy, (EventStatic, EventExpo)):
        return policy_trigger_value(policy, t, state, ctx, E) >= 0
    raise TypeError(f"unknown policy {policy!r}")


def apply_update(state: WaveState, grid: Grid1D, ctx: BoundaryControlContext, log: EventLog,
                 t: float) -> tuple[BoundaryControlContext, EventLog]:
    """Latch the boundary velocity at ``t`` and log the instant.

    At ``t = 0`` the initial velocity datum is latched as given; later
    instants latch the velocity consistent with the new control.
    """
    if log and not t > log.times[-1]:
        raise RuntimeError(f"update at t={t} does not follow the last one at {log.times[-1]}")
    if not log:
        v = float(state.v[-1])
    else:
        v = latched_velocity(state, grid, ctx.alpha_at_gamma1)
    new_log = EventLog(log.times + [t], log.values + [v])
    return replace(ctx, v_hold=v), new_log


def parse_policy(text: str, gamma: float = 0.2, nu0: float = 0.1):
    """``continuous | frozen | event[:g,nu0] | eventexp:eps0,theta | periodic:tau``."""
    name, _, args = text.strip().partition(":")
    name = name.lower()
    vals = [float(a) for a in args.split(",")] if args else []
    try:
        if name == "continuous" and not vals:
            return Continuous()
        if name == "frozen" and not vals:
            return Frozen()
        if name == "periodic" and len(vals) == 1:
            return Periodic(vals[0])
        if name == "event" and len(vals) in (0, 2):
            return EventStatic(*(vals or (gamma, nu0)))
        if name == "eventexp" and len(vals) == 2:
            return EventExpo(vals[0], vals[1], gamma)
    except ValueError as exc:
        raise ValueError(f"bad policy {text!r}: {exc}") from None
    raise ValueError(f"bad policy {text!r}")


def format_policy(policy) -> str:
    if isinstance(policy, Periodic):
        return f"periodic:{policy.tau!r}"
    if isinstance(policy, EventStatic):
        return f"event:{policy.gamma!r},{policy.nu0!r}"
    if isinstance(policy, EventExpo):
        return f"eventexp:{policy.eps0!r},{policy.theta!r}"
    return policy.label()
