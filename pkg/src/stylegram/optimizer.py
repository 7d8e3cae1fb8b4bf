"""Pixel-space minimization: L-BFGS with strong Wolfe line search, Adam fallback.

``minimize`` works on any objective exposing ``eval(image) -> (loss, grad,
breakdown)``; non-stationary objectives additionally carry a
``target_provider`` and a ``regenerate_targets(iteration)`` hook and are only
compatible with the first-order method (stale curvature pairs make L-BFGS
meaningless there, so it refuses them outright).

When a clamp range is configured, the line search evaluates trial points
after projection onto the box, so accepted-step losses stay nonincreasing
even when the projection is active.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NonFiniteError, ShapeMismatchError

CONVERGENCE_WINDOW = 10  # iterations spanned by the relative-loss-change test

NOISE_RANGE_DEFAULT = (-128.0, 128.0)


@dataclass(frozen=True)
class OptConfig:
    max_iterations: int = 500
    method: str = "lbfgs"  # lbfgs | adam
    memory: int = 10
    c1: float = 1e-4
    c2: float = 0.9
    adam_step: float = 1.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    clamp: tuple[float, float] | None = None
    tolerance: float = 1e-7
    trace_every: int = 1

    def __post_init__(self):
        if self.method not in ("lbfgs", "adam"):
            raise ConfigurationError(f"unknown optimization method {self.method!r}")
        if self.memory < 1:
            raise ConfigurationError("lbfgs memory must be >= 1")
        if not 0.0 < self.c1 < self.c2 < 1.0:
            raise ConfigurationError("Wolfe constants must satisfy 0 < c1 < c2 < 1")
        if self.max_iterations < 0 or self.trace_every < 1:
            raise ConfigurationError("invalid iteration or trace settings")
        if self.clamp is not None and self.clamp[0] >= self.clamp[1]:
            raise ConfigurationError(f"empty clamp range {self.clamp}")


@dataclass
class TracePoint:
    iteration: int
    loss: float
    breakdown: list


@dataclass
class OptRun:
    image: np.ndarray
    trace: list[TracePoint]
    iterations: int
    evaluations: int
    reason: str


def init_image(mode: str, content: np.ndarray, style: np.ndarray | None = None,
               seed: int = 0, noise_range: tuple[float, float] = NOISE_RANGE_DEFAULT) -> np.ndarray:
    """Starting point for the descent: a copy of content/style, or seeded uniform noise."""
    content = np.asarray(content, dtype=np.float64)
    if mode == "content":
        return content.copy()
    if mode == "style":
        if style is None:
            raise ConfigurationError("style initialization needs a style image")
        style = np.asarray(style, dtype=np.float64)
        if style.shape != content.shape:
            raise ShapeMismatchError(
                f"style image {style.shape} must match content dims {content.shape}"
            )
        return style.copy()
    if mode == "noise":
        lo, hi = noise_range
        rng = np.random.default_rng(seed)
        return rng.uniform(lo, hi, size=content.shape)
    raise ConfigurationError(f"unknown init mode {mode!r}")


class _Evaluator:
    """Counts evaluations and rejects non-finite losses/gradients with a pointer."""

    def __init__(self, objective):
        self.objective = objective
        self.count = 0

    def __call__(self, x: np.ndarray):
        loss, grad, breakdown = self.objective.eval(x)
        self.count += 1
        if not math.isfinite(loss):
            for term in breakdown:
                if not math.isfinite(term.contribution):
                    raise NonFiniteError(
                        f"loss became non-finite; first offending entry: {term.name}"
                    )
            raise NonFiniteError("total loss became non-finite")
        if not np.all(np.isfinite(grad)):
            idx = int(np.flatnonzero(~np.isfinite(grad))[0])
            raise NonFiniteError(
                f"gradient became non-finite; first offending entry: flat pixel {idx} "
                f"(coordinates {np.unravel_index(idx, grad.shape)})"
            )
        return loss, grad, breakdown


def _project(x: np.ndarray, clamp: tuple[float, float] | None) -> np.ndarray:
    if clamp is None:
        return x
    return np.clip(x, clamp[0], clamp[1])


def _dir_deriv(x: np.ndarray, g: np.ndarray, d: np.ndarray,
               clamp: tuple[float, float] | None) -> float:
    """Directional derivative of t -> f(project(x + t d)) at the current point."""
    if clamp is None:
        return float(np.vdot(g, d))
    lo, hi = clamp
    blocked = ((x <= lo) & (d < 0)) | ((x >= hi) & (d > 0))
    return float(np.vdot(np.where(blocked, 0.0, g), d))


def _cubic_step(t_lo, f_lo, g_lo, t_hi, f_hi, g_hi) -> float | None:
    """Minimizer of the cubic Hermite interpolant, or None when degenerate."""
    span = t_hi - t_lo
    if span == 0.0:
        return None
    d1 = g_lo + g_hi - 3.0 * (f_lo - f_hi) / (t_lo - t_hi)
    radicand = d1 * d1 - g_lo * g_hi
    if radicand < 0.0:
        return None
    d2 = math.copysign(math.sqrt(radicand), span)
    denom = g_hi - g_lo + 2.0 * d2
    if denom == 0.0:
        return None
    t = t_hi - span * (g_hi + d2 - d1) / denom
    if not math.isfinite(t):
        return None
    return t


class _LineSearchPoint:
    def __init__(self, t, x, f, g, breakdown, dphi):
        self.t = t
        self.x = x
        self.f = f
        self.g = g
        self.breakdown = breakdown
        self.dphi = dphi


def _strong_wolfe(evaluate, x0, f0, d, dphi0, t_init, c1, c2, clamp,
                  max_steps: int = 30):
    """Strong Wolfe line search on phi(t) = f(project(x0 + t d)).

    Returns the accepted point, or the best Armijo point seen when no Wolfe
    point is found within budget, or None when not even a decrease exists.
    """

    def phi(t) -> _LineSearchPoint:
        xt = _project(x0 + t * d, clamp)
        f, g, breakdown = evaluate(xt)
        return _LineSearchPoint(t, xt, f, g, breakdown, _dir_deriv(xt, g, d, clamp))

    best_armijo: _LineSearchPoint | None = None

    def note(p: _LineSearchPoint):
        nonlocal best_armijo
        if p.f <= f0 + c1 * p.t * dphi0 and (best_armijo is None or p.f < best_armijo.f):
            best_armijo = p

    def zoom(lo: _LineSearchPoint, hi: _LineSearchPoint):
        for _ in range(max_steps):
            t = _cubic_step(lo.t, lo.f, lo.dphi, hi.t, hi.f, hi.dphi)
            left, right = min(lo.t, hi.t), max(lo.t, hi.t)
            margin = 0.1 * (right - left)
            if t is None or not (left + margin <= t <= right - margin):
                t = 0.5 * (left + right)
            p = phi(t)
            note(p)
            if p.f > f0 + c1 * t * dphi0 or p.f >= lo.f:
                hi = p
            else:
                if abs(p.dphi) <= -c2 * dphi0:
                    return p
                if p.dphi * (hi.t - lo.t) >= 0.0:
                    hi = lo
                lo = p
            if abs(hi.t - lo.t) <= 1e-16 * max(1.0, abs(lo.t)):
                break
        return best_armijo

    prev = _LineSearchPoint(0.0, x0, f0, None, None, dphi0)
    t = t_init
    for i in range(max_steps):
        p = phi(t)
        note(p)
        if p.f > f0 + c1 * t * dphi0 or (i > 0 and p.f >= prev.f):
            return zoom(prev, p)
        if abs(p.dphi) <= -c2 * dphi0:
            return p
        if p.dphi >= 0.0:
            return zoom(p, prev)
        prev = p
        t *= 2.0
    return best_armijo


class _LbfgsMemory:
    def __init__(self, m: int):
        self.m = m
        self.s: list[np.ndarray] = []
        self.y: list[np.ndarray] = []
        self.rho: list[float] = []

    def push(self, s: np.ndarray, y: np.ndarray) -> None:
        sy = float(np.vdot(s, y))
        if sy <= 1e-12 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            return  # curvature too weak to be useful
        if len(self.s) == self.m:
            self.s.pop(0), self.y.pop(0), self.rho.pop(0)
        self.s.append(s)
        self.y.append(y)
        self.rho.append(1.0 / sy)

    def clear(self) -> None:
        self.s.clear(), self.y.clear(), self.rho.clear()

    def direction(self, g: np.ndarray) -> np.ndarray:
        """Two-loop recursion: -H g with the usual gamma-scaled initial Hessian."""
        q = g.copy()
        alphas = []
        for s, y, rho in zip(reversed(self.s), reversed(self.y), reversed(self.rho)):
            a = rho * float(np.vdot(s, q))
            alphas.append(a)
            q -= a * y
        if self.s:
            gamma = 1.0 / (self.rho[-1] * float(np.vdot(self.y[-1], self.y[-1])))
            q *= gamma
        for (s, y, rho), a in zip(zip(self.s, self.y, self.rho), reversed(alphas)):
            b = rho * float(np.vdot(y, q))
            q += (a - b) * s
        return -q


def _window_converged(losses: list[float], tolerance: float) -> bool:
    if len(losses) <= CONVERGENCE_WINDOW:
        return False
    ref = losses[-1 - CONVERGENCE_WINDOW]
    return abs(ref - losses[-1]) <= tolerance * max(abs(ref), 1e-300)


def minimize(objective, init: np.ndarray, cfg: OptConfig) -> OptRun:
    """Minimize the objective from the given start image. Deterministic throughout."""
    provider = getattr(objective, "target_provider", None)
    if provider is not None and cfg.method == "lbfgs":
        raise ConfigurationError(
            "per-iteration target regeneration makes the objective non-stationary; "
            "lbfgs curvature estimates assume a fixed objective — use the adam method"
        )
    if cfg.method == "adam":
        return _minimize_adam(objective, init, cfg)
    return _minimize_lbfgs(objective, init, cfg)


def _minimize_lbfgs(objective, init: np.ndarray, cfg: OptConfig) -> OptRun:
    evaluate = _Evaluator(objective)
    x = _project(np.asarray(init, dtype=np.float64).copy(), cfg.clamp)
    f, g, breakdown = evaluate(x)
    trace = [TracePoint(0, f, breakdown)]
    losses = [f]
    memory = _LbfgsMemory(cfg.memory)
    reason = "max_iterations"
    iterations = 0

    for k in range(1, cfg.max_iterations + 1):
        if not np.any(g):
            reason = "gradient_zero"
            break
        d = memory.direction(g)
        dphi0 = _dir_deriv(x, g, d, cfg.clamp)
        if dphi0 >= 0.0:
            memory.clear()
            d = -g
            dphi0 = _dir_deriv(x, g, d, cfg.clamp)
            if dphi0 >= 0.0:
                reason = "line_search_failed"
                break
        t_init = 1.0 if memory.s else min(1.0, 1.0 / max(float(np.abs(g).sum()), 1e-12))
        point = _strong_wolfe(evaluate, x, f, d, dphi0, t_init, cfg.c1, cfg.c2, cfg.clamp)
        if point is None and memory.s:
            memory.clear()
            d = -g
            dphi0 = _dir_deriv(x, g, d, cfg.clamp)
            if dphi0 < 0.0:
                point = _strong_wolfe(evaluate, x, f, d, dphi0, t_init, cfg.c1, cfg.c2,
                                      cfg.clamp)
        if point is None:
            reason = "line_search_failed"
            break
        memory.push(point.x - x, point.g - g)
        x, f, g, breakdown = point.x, point.f, point.g, point.breakdown
        iterations = k
        losses.append(f)
        if k % cfg.trace_every == 0:
            trace.append(TracePoint(k, f, breakdown))
        if _window_converged(losses, cfg.tolerance):
            reason = "converged"
            break

    if trace[-1].iteration != iterations:
        trace.append(TracePoint(iterations, f, breakdown))
    return OptRun(x, trace, iterations, evaluate.count, reason)


def _minimize_adam(objective, init: np.ndarray, cfg: OptConfig) -> OptRun:
    evaluate = _Evaluator(objective)
    regenerate = getattr(objective, "regenerate_targets", lambda iteration: None)
    x = _project(np.asarray(init, dtype=np.float64).copy(), cfg.clamp)
    regenerate(0)
    f, g, breakdown = evaluate(x)
    trace = [TracePoint(0, f, breakdown)]
    losses = [f]
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    reason = "max_iterations"
    iterations = 0

    for k in range(1, cfg.max_iterations + 1):
        if not np.any(g):
            reason = "gradient_zero"
            break
        m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g
        v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * g * g
        m_hat = m / (1.0 - cfg.adam_beta1 ** k)
        v_hat = v / (1.0 - cfg.adam_beta2 ** k)
        x = _project(x - cfg.adam_step * m_hat / (np.sqrt(v_hat) + cfg.adam_eps), cfg.clamp)
        regenerate(k)
        f, g, breakdown = evaluate(x)
        iterations = k
        losses.append(f)
        if k % cfg.trace_every == 0:
            trace.append(TracePoint(k, f, breakdown))
        if _window_converged(losses, cfg.tolerance):
            reason = "converged"
            break

    if trace[-1].iteration != iterations:
        trace.append(TracePoint(iterations, f, breakdown))
    return OptRun(x, trace, iterations, evaluate.count, reason)


def grad_check(objective, image: np.ndarray, eps: float = 1e-4, samples: int = 16,
               seed: int = 0) -> float:
    """Worst relative error between analytic and central-difference gradients.

    Probes ``samples`` distinct pixel coordinates chosen by the seed. Each
    coordinate is compared relative to its own magnitude, floored at a small
    fraction of the gradient's overall scale: coordinates whose true gradient
    is essentially zero would otherwise amplify plain finite-difference noise
    into meaningless relative errors.
    """
    if eps <= 0:
        raise ConfigurationError("finite-difference eps must be positive")
    if samples < 1:
        raise ConfigurationError("need at least one sample coordinate")
    x = np.asarray(image, dtype=np.float64).copy()
    rng = np.random.default_rng(seed)
    picks = rng.choice(x.size, size=min(samples, x.size), replace=False)
    _, grad, _ = objective.eval(x)
    fds = np.empty(len(picks))
    for k, idx in enumerate(picks):
        original = x.flat[idx]
        x.flat[idx] = original + eps
        f_plus = objective.eval(x)[0]
        x.flat[idx] = original - eps
        f_minus = objective.eval(x)[0]
        x.flat[idx] = original
        fds[k] = (f_plus - f_minus) / (2.0 * eps)
    analytic = grad.flat[picks]
    scale = max(float(np.abs(grad).max()), float(np.abs(fds).max()))
    floor = max(1e-3 * scale, 1e-12)
    denom = np.maximum(np.maximum(np.abs(fds), np.abs(analytic)), floor)
    return float(np.max(np.abs(fds - analytic) / denom))
