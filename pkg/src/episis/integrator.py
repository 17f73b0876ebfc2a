"""Fixed-step RK4 integration of the coupled infection/gain system.

The stepping loop runs in a compiled kernel; the Python driver only handles
sampling, bookkeeping and the spectral post-processing.  Sampling is either
logarithmic in time (the default, matching log-time plots) or every
``record_every`` steps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .dynamics import ControlConfig
from .network import EpidemicNetwork
from .spectral import reproduction_number

CLAMP_TOL = 1e-9
EPS_EXTINCT = 1e-8
EXTINCT_STEPS = 10
STEADY_TOL = 1e-10
EPS_CONV = 1e-4

_MODE_CODE = {"uncontrolled": 0, "infection": 1, "recovery": 2}

# kernel exit status
_OK, _EXTINCT, _STEADY, _CLAMP, _NAN = 0, 1, 2, 3, 4


class IntegrationError(RuntimeError):
    pass


@njit(cache=True, inline="always")
def _powi(v, p):
    out = v
    for _ in range(p - 1):
        out *= v
    return out


_TINY = 1e-280


@njit(cache=True, inline="always")
def _field(x, g, ge, d, b, alpha, p, mode, dx, dg):
    n = x.size
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += b[i, j] * x[j]
        if mode == 2:
            dx[i] = -ge[i] * d[i] * x[i] + (1.0 - x[i]) * s
            dg[i] = alpha[i] * _powi(x[i], p)
        elif mode == 1:
            dx[i] = -d[i] * x[i] + (1.0 - x[i]) * ge[i] * s
            dg[i] = -alpha[i] * _powi(x[i], p) * g[i]
        else:
            dx[i] = -d[i] * x[i] + (1.0 - x[i]) * s
            dg[i] = 0.0


@njit(cache=True)
def _advance(x, g, gf, d, b, alpha, p, mode, h, nsteps, step0, period_steps,
             stop_extinct, eps_extinct, extinct_needed, ext_count,
             stop_steady, steady_tol, steady_count, clamp_tol, max_clamp):
    n = x.size
    k1x = np.empty(n); k1g = np.empty(n)
    k2x = np.empty(n); k2g = np.empty(n)
    k3x = np.empty(n); k3g = np.empty(n)
    k4x = np.empty(n); k4g = np.empty(n)
    xs = np.empty(n); gs = np.empty(n)
    periodic = period_steps > 0
    for i in range(nsteps):
        if periodic and (step0 + i) % period_steps == 0:
            for j in range(n):
                gf[j] = g[j]
        _field(x, g, gf if periodic else g, d, b, alpha, p, mode, k1x, k1g)

        if stop_steady:
            xmax = 0.0
            still = True
            for j in range(n):
                xmax = max(xmax, x[j])
                if abs(k1x[j]) > steady_tol * abs(x[j]) or abs(k1g[j]) > steady_tol * abs(g[j]):
                    still = False
            if still and xmax >= eps_extinct:
                steady_count += 1
                if steady_count >= extinct_needed:
                    return i, _STEADY, ext_count, steady_count, max_clamp
            else:
                steady_count = 0

        for j in range(n):
            xs[j] = x[j] + 0.5 * h * k1x[j]; gs[j] = g[j] + 0.5 * h * k1g[j]
        _field(xs, gs, gf if periodic else gs, d, b, alpha, p, mode, k2x, k2g)
        for j in range(n):
            xs[j] = x[j] + 0.5 * h * k2x[j]; gs[j] = g[j] + 0.5 * h * k2g[j]
        _field(xs, gs, gf if periodic else gs, d, b, alpha, p, mode, k3x, k3g)
        for j in range(n):
            xs[j] = x[j] + h * k3x[j]; gs[j] = g[j] + h * k3g[j]
        _field(xs, gs, gf if periodic else gs, d, b, alpha, p, mode, k4x, k4g)

        xmax = 0.0
        for j in range(n):
            xn = x[j] + h / 6.0 * (k1x[j] + 2.0 * k2x[j] + 2.0 * k3x[j] + k4x[j])
            gn = g[j] + h / 6.0 * (k1g[j] + 2.0 * k2g[j] + 2.0 * k3g[j] + k4g[j])
            if not (math.isfinite(xn) and math.isfinite(gn)):
                return i, _NAN, ext_count, steady_count, max_clamp
            c = 0.0
            if xn < 0.0:
                c = -xn; xn = 0.0
            elif xn < _TINY:
                # subnormal floats are two orders of magnitude slower
                xn = 0.0
            elif xn > 1.0:
                c = xn - 1.0; xn = 1.0
            if mode == 1:
                if gn < 0.0:
                    c = max(c, -gn); gn = 0.0
                elif gn > g[j]:
                    c = max(c, gn - g[j]); gn = g[j]
            elif mode == 2 and gn < g[j]:
                c = max(c, g[j] - gn); gn = g[j]
            max_clamp = max(max_clamp, c)
            if c > clamp_tol:
                return i, _CLAMP, ext_count, steady_count, max_clamp
            x[j] = xn
            g[j] = gn
            xmax = max(xmax, xn)

        if xmax < eps_extinct:
            ext_count += 1
            if stop_extinct and ext_count >= extinct_needed:
                return i + 1, _EXTINCT, ext_count, steady_count, max_clamp
        else:
            ext_count = 0
    return nsteps, _OK, ext_count, steady_count, max_clamp


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    x: np.ndarray
    g: np.ndarray
    r_t_times: np.ndarray
    r_t: np.ndarray
    peak_avg_infection: float
    terminal: str
    t_extinct: float | None
    max_clamp: float
    step: float
    horizon: float
    mode: str
    final_gains: np.ndarray
    x_limit: np.ndarray
    converged: bool

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def x0(self) -> np.ndarray:
        return self.x[0]

    @property
    def g0(self) -> np.ndarray:
        return self.g[0]

    @property
    def avg_infection(self) -> np.ndarray:
        return self.x.mean(axis=1)

    def first_time_below(self, level: float) -> float:
        """First recorded time at which ``max_i x_i`` drops below ``level`` (inf if never)."""
        hit = np.flatnonzero(self.x.max(axis=1) < level)
        return float(self.times[hit[0]]) if hit.size else math.inf


@dataclass(frozen=True)
class Limits:
    x_limit: np.ndarray
    g_limit: np.ndarray
    converged: bool
    drift: float


def detect_limits(times, x, g, window: float = 0.05, eps_conv: float = EPS_CONV) -> Limits:
    """Tail-window estimates of ``lim x`` and ``lim g``.

    The window is the last ``window`` fraction of the samples (at least two).
    ``converged`` is true when every coordinate moves by less than
    ``eps_conv`` (relative to ``max(1, |value|)``) across the window.
    """
    x = np.asarray(x)
    g = np.asarray(g)
    m = max(2, int(math.ceil(window * len(times))))
    m = min(m, len(times))
    xs, gs = x[-m:], g[-m:]
    scale_x = np.maximum(1.0, np.abs(xs).max(axis=0))
    scale_g = np.maximum(1.0, np.abs(gs).max(axis=0))
    drift = max(
        float(np.max(np.ptp(xs, axis=0) / scale_x)),
        float(np.max(np.ptp(gs, axis=0) / scale_g)),
    )
    return Limits(xs.mean(axis=0), gs.mean(axis=0), drift < eps_conv, drift)


def _sample_steps(total: int, samples: int, record_every: int | None) -> np.ndarray:
    if record_every:
        idx = np.arange(0, total + 1, record_every)
    else:
        idx = np.unique(np.round(np.geomspace(1, max(total, 1), samples)).astype(np.int64))
        idx = np.concatenate([[0], idx])
    idx = np.unique(np.concatenate([idx, [total]]))
    return idx[idx <= total]


def integrate(
    net: EpidemicNetwork,
    cfg: ControlConfig,
    x0,
    horizon: float,
    step: float = 1e-2,
    *,
    samples: int = 200,
    record_every: int | None = None,
    rt_samples: int = 200,
    stop_on_extinction: bool = True,
    stop_on_steady: bool = True,
    clamp_tol: float = CLAMP_TOL,
    eps_extinct: float = EPS_EXTINCT,
    extinct_steps: int = EXTINCT_STEPS,
    steady_tol: float = STEADY_TOL,
) -> Trajectory:
    """Integrate ``(x, g)`` from ``(x0, cfg.g0)`` up to ``horizon``.

    After every step ``x`` is clamped to [0, 1] and ``g`` to its monotone
    domain; a correction larger than ``clamp_tol`` aborts the run, since it
    means the step is too coarse for the flow's invariant box.
    """
    if cfg.n != net.n:
        raise ValueError(f"config is for {cfg.n} nodes, network has {net.n}")
    x = np.array(x0, dtype=float).ravel()
    if x.shape != (net.n,) or np.any(~np.isfinite(x)) or np.any((x < 0) | (x > 1)):
        raise ValueError("x0 must be a vector in [0, 1]^n")
    if not (step > 0 and horizon > 0):
        raise ValueError("step and horizon must be positive")
    total = int(round(horizon / step))
    if total < 1:
        raise ValueError("horizon shorter than one step")
    period_steps = 0
    if cfg.period is not None:
        ratio = cfg.period / step
        period_steps = int(round(ratio))
        if period_steps < 1 or abs(ratio - period_steps) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"period {cfg.period} must be a whole number of steps of {step}")

    g = cfg.g0.astype(float).copy()
    gf = g.copy()
    d = np.ascontiguousarray(net.d, dtype=float)
    b = np.ascontiguousarray(net.b, dtype=float)
    alpha = np.ascontiguousarray(cfg.alpha, dtype=float)
    mode = _MODE_CODE[cfg.mode]

    targets = _sample_steps(total, samples, record_every)
    rec_steps = [0]
    xs_rec = [x.copy()]
    gs_rec = [g.copy()]
    pos = 0
    ext_count = steady_count = 0
    max_clamp = 0.0
    terminal = "horizon"
    t_extinct = None
    for target in targets[1:]:
        nsteps = int(target - pos)
        done, status, ext_count, steady_count, max_clamp = _advance(
            x, g, gf, d, b, alpha, cfg.p, mode, step, nsteps, pos, period_steps,
            stop_on_extinction, eps_extinct, extinct_steps, ext_count,
            stop_on_steady, steady_tol, steady_count, clamp_tol, max_clamp,
        )
        pos += done
        if status == _CLAMP:
            raise IntegrationError(
                f"clamp correction {max_clamp:.3e} exceeds {clamp_tol:.1e} at t = {pos * step:.6g}; "
                "reduce the step size"
            )
        if status == _NAN:
            raise IntegrationError(f"non-finite state at t = {pos * step:.6g}")
        if done:
            rec_steps.append(pos)
            xs_rec.append(x.copy())
            gs_rec.append(g.copy())
        if status == _EXTINCT:
            terminal = "extinct"
            t_extinct = pos * step
            break
        if status == _STEADY:
            terminal = "endemic_steady"
            break
    if terminal == "horizon" and ext_count >= extinct_steps:
        terminal = "extinct"
        t_extinct = (pos - ext_count + extinct_steps) * step

    times = np.asarray(rec_steps, dtype=float) * step
    xs = np.vstack(xs_rec)
    gs = np.vstack(gs_rec)
    rt_idx = _rt_indices(times, rt_samples)
    rt = np.array([_r_t(net, cfg, gs[i]) for i in rt_idx])
    lim = detect_limits(times, xs, gs)
    return Trajectory(
        times=times,
        x=xs,
        g=gs,
        r_t_times=times[rt_idx],
        r_t=rt,
        peak_avg_infection=float(xs.mean(axis=1).max()),
        terminal=terminal,
        t_extinct=t_extinct,
        max_clamp=max_clamp,
        step=step,
        horizon=total * step,
        mode=cfg.mode,
        final_gains=lim.g_limit,
        x_limit=lim.x_limit,
        converged=lim.converged,
    )


def _rt_indices(times: np.ndarray, count: int) -> np.ndarray:
    if len(times) <= count:
        return np.arange(len(times))
    grid = np.geomspace(max(times[1], 1e-12), times[-1], count - 1)
    idx = np.searchsorted(times, grid)
    return np.unique(np.concatenate([[0], np.clip(idx, 0, len(times) - 1), [len(times) - 1]]))


def _r_t(net: EpidemicNetwork, cfg: ControlConfig, g: np.ndarray) -> float:
    if cfg.mode == "uncontrolled":
        return reproduction_number(net, np.ones(net.n), "infection")
    if np.any(g <= 0):
        return 0.0 if cfg.mode == "infection" else math.nan
    return reproduction_number(net, g, cfg.mode)


def r_infinity(net: EpidemicNetwork, cfg: ControlConfig, gains) -> float:
    return _r_t(net, cfg, np.asarray(gains, dtype=float))
