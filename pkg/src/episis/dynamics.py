"""Controlled SIS vector field.

Three regimes share one right-hand side:

* ``uncontrolled``  ``dx = -D x + (I - X) B x``
* ``infection``     ``dx = -D x + (I - X) G B x``,  ``dg = -alpha x^p g``
* ``recovery``      ``dx = -G D x + (I - X) B x``,  ``dg = +alpha x^p``

A node with ``alpha_i = 0`` keeps its gain fixed, which is how partial
control is expressed.  Under a periodic update policy the gain entering
``dx`` is the snapshot ``g(kT)`` while ``g`` itself keeps evolving.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MODES = ("uncontrolled", "infection", "recovery")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ControlConfig:
    mode: str
    alpha: np.ndarray
    p: int = 1
    period: float | None = None
    g0: np.ndarray | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        alpha = np.array(self.alpha, dtype=float).ravel()
        if np.any(~np.isfinite(alpha)) or np.any(alpha < 0):
            raise ConfigError("alpha must be finite and nonnegative")
        if self.mode == "uncontrolled":
            alpha = np.zeros_like(alpha)
        object.__setattr__(self, "p", _single_p(self.p))
        if self.period is not None and not self.period > 0:
            raise ConfigError(f"period must be positive, got {self.period}")
        g0 = np.ones_like(alpha) if self.g0 is None else np.array(self.g0, dtype=float).ravel()
        if g0.shape != alpha.shape:
            raise ConfigError("g0 and alpha differ in length")
        if self.mode == "infection" and np.any((g0 <= 0) | (g0 > 1)):
            raise ConfigError("infection control needs g0 in (0, 1]")
        if self.mode == "recovery" and np.any(~np.isfinite(g0) | (g0 < 1)):
            raise ConfigError("recovery control needs g0 in [1, inf)")
        if self.mode == "uncontrolled" and np.any(g0 != 1):
            raise ConfigError("uncontrolled runs have unit gains")
        alpha.setflags(write=False)
        g0.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "g0", g0)

    @classmethod
    def full(cls, mode: str, alpha, p: int = 1, period: float | None = None, g0=None):
        cfg = cls(mode, alpha, p, period, g0)
        if mode != "uncontrolled" and np.any(cfg.alpha <= 0):
            raise ConfigError("full control needs alpha_i > 0 at every node")
        return cfg

    @classmethod
    def partial(cls, mode: str, n: int, controlled: Sequence[int], alpha=1.0, p: int = 1,
                period: float | None = None):
        """Gain law active only on ``controlled``; at least one node left out."""
        a = np.zeros(n)
        idx = list(controlled)
        a[idx] = np.broadcast_to(np.asarray(alpha, dtype=float), (len(idx),)) if idx else []
        if np.all(a > 0):
            raise ConfigError("partial control must leave at least one node uncontrolled")
        if idx and np.any(a[idx] <= 0):
            raise ConfigError("controlled nodes need alpha_i > 0")
        return cls(mode, a, p, period)

    @classmethod
    def uncontrolled(cls, n: int):
        return cls("uncontrolled", np.zeros(n))

    @property
    def n(self) -> int:
        return self.alpha.size

    @property
    def controlled(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.alpha > 0))

    @property
    def is_full(self) -> bool:
        return bool(np.all(self.alpha > 0))

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "alpha": self.alpha.tolist(),
            "p": self.p,
            "period": self.period,
            "g0": self.g0.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ControlConfig":
        return cls(data["mode"], data["alpha"], data.get("p", 1), data.get("period"), data.get("g0"))


def _single_p(p) -> int:
    if isinstance(p, (list, tuple, np.ndarray)):
        vals = set(np.asarray(p).ravel().tolist())
        if len(vals) != 1:
            raise ConfigError(
                "heterogeneous exponents are not supported: positivity of the limiting "
                "gains is only guaranteed when every node uses the same p"
            )
        p = vals.pop()
    if isinstance(p, float) and p.is_integer():
        p = int(p)
    if not isinstance(p, (int, np.integer)) or isinstance(p, bool) or p < 1:
        raise ConfigError(f"p must be a positive integer, got {p!r}")
    return int(p)


@dataclass(frozen=True, eq=False)
class SystemState:
    t: float
    x: np.ndarray
    g: np.ndarray
    frozen_g: np.ndarray | None = field(default=None)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        g = np.asarray(self.g, dtype=float)
        if np.any(~np.isfinite(x)) or np.any(~np.isfinite(g)):
            raise ValueError("state has NaN or infinite entries")
        if np.any((x < 0) | (x > 1)):
            raise ValueError("infection fractions must lie in [0, 1]")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "g", g)
        if self.frozen_g is not None:
            object.__setattr__(self, "frozen_g", np.asarray(self.frozen_g, dtype=float))

    @property
    def g_eff(self) -> np.ndarray:
        return self.g if self.frozen_g is None else self.frozen_g


def phi(x, alpha, p: int):
    """Gain adaptation rate ``alpha * x**p``."""
    x = np.asarray(x, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if np.any((x < 0) | (x > 1)):
        raise ValueError("phi is defined on [0, 1]")
    if np.any(alpha < 0) or p < 1:
        raise ValueError("phi needs alpha >= 0 and p >= 1")
    out = alpha * x**p
    return float(out) if out.ndim == 0 else out


def rhs(state: SystemState, net, cfg: ControlConfig) -> tuple[np.ndarray, np.ndarray]:
    x, g = state.x, state.g
    ge = state.g_eff
    pressure = net.b @ x
    if cfg.mode == "uncontrolled":
        dx = -net.d * x + (1 - x) * pressure
        return dx, np.zeros_like(g)
    rate = phi(x, cfg.alpha, cfg.p)
    if cfg.mode == "infection":
        dx = -net.d * x + (1 - x) * ge * pressure
        return dx, -rate * g
    dx = -ge * net.d * x + (1 - x) * pressure
    return dx, rate


def gain_closed_form(times, x_i, alpha: float, p: int, g0: float = 1.0, mode: str = "infection"):
    """Gain history rebuilt from a sampled infection history by trapezoidal quadrature.

    Infection control: ``g(t) = g0 * exp(-int_0^t alpha x^p)``; recovery
    control: ``g(t) = g0 + int_0^t alpha x^p``.
    """
    t = np.asarray(times, dtype=float)
    xs = np.asarray(x_i, dtype=float)
    if t.size == 0 or xs.size == 0:
        raise ValueError("empty trajectory")
    if t.shape != xs.shape:
        raise ValueError("times and samples differ in length")
    f = alpha * xs**p
    integral = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(t))])
    if mode == "infection":
        return g0 * np.exp(-integral)
    if mode == "recovery":
        return g0 + integral
    raise ValueError(f"unknown mode {mode!r}")


def gain_envelope(g0, alpha, t) -> np.ndarray:
    """Upper envelope ``g0 + alpha * t`` of recovery-control gains (max of phi is alpha)."""
    return np.asarray(g0) + np.asarray(alpha) * t
