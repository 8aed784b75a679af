"""Limited-memory BFGS with a strong Wolfe line search.

The line search is the bracketing/zoom scheme of the standard textbook
treatment, with safeguarded cubic interpolation inside the bracket.
"""

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericError
from ..loss import evaluate


@dataclass
class LbfgsState:
    memory: int = 50
    c1: float = 1e-4
    c2: float = 0.9
    max_evals: int = 25
    refine: bool = True
    s_hist: deque = field(default_factory=deque)
    y_hist: deque = field(default_factory=deque)
    rho_hist: deque = field(default_factory=deque)

    def push(self, s, y):
        """Store a correction pair if it has positive curvature."""
        sy = float(s @ y)
        if not sy > 1e-12 * float(np.sqrt((s @ s) * (y @ y))):
            return False
        if len(self.s_hist) == self.memory:
            self.s_hist.popleft()
            self.y_hist.popleft()
            self.rho_hist.popleft()
        self.s_hist.append(s)
        self.y_hist.append(y)
        self.rho_hist.append(1.0 / sy)
        return True

    def reset(self):
        self.s_hist.clear()
        self.y_hist.clear()
        self.rho_hist.clear()

    def direction(self, g):
        """Two-loop recursion: ``-H g`` for the current inverse-Hessian model."""
        q = g.copy()
        alphas = []
        for s, y, rho in zip(reversed(self.s_hist), reversed(self.y_hist), reversed(self.rho_hist)):
            a = rho * (s @ q)
            alphas.append(a)
            q -= a * y
        if self.s_hist:
            s, y = self.s_hist[-1], self.y_hist[-1]
            q *= (s @ y) / (y @ y)
        for (s, y, rho), a in zip(zip(self.s_hist, self.y_hist, self.rho_hist), reversed(alphas)):
            b = rho * (y @ q)
            q += (a - b) * s
        return -q


@dataclass
class LbfgsResult:
    x: np.ndarray
    f: float
    grad_norm: float
    iterations: int
    evaluations: int
    status: str
    trace: list


def _cubic_min(a, fa, ga, b, fb, gb):
    """Minimizer of the cubic through two points with slopes, or None."""
    d1 = ga + gb - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - ga * gb
    if disc < 0:
        return None
    d2 = np.copysign(np.sqrt(disc), b - a)
    denom = gb - ga + 2.0 * d2
    if denom == 0:
        return None
    t = b - (b - a) * (gb + d2 - d1) / denom
    return t if np.isfinite(t) else None


def _zoom(phi, lo, hi, f0, g0, c1, c2, budget):
    a_lo, f_lo, g_lo = lo
    a_hi, f_hi, g_hi = hi
    for _ in range(budget):
        left, right = min(a_lo, a_hi), max(a_lo, a_hi)
        width = right - left
        t = _cubic_min(a_lo, f_lo, g_lo, a_hi, f_hi, g_hi)
        if t is None or not (left + 0.1 * width <= t <= right - 0.1 * width):
            t = 0.5 * (a_lo + a_hi)
        f_t, g_t, extra = phi(t)
        if not np.isfinite(f_t) or f_t > f0 + c1 * t * g0 or f_t >= f_lo:
            a_hi, f_hi, g_hi = t, f_t, g_t
            continue
        if abs(g_t) <= -c2 * g0:
            return t, f_t, extra
        if g_t * (a_hi - a_lo) >= 0:
            a_hi, f_hi, g_hi = a_lo, f_lo, g_lo
        a_lo, f_lo, g_lo = t, f_t, g_t
        if width < 1e-16 * max(1.0, right):
            break
    return None


def wolfe_search(fun, x, f0, g, d, alpha0, c1=1e-4, c2=0.9, max_evals=25, refine=True):
    """Step length satisfying the strong Wolfe conditions along ``d``.

    Returns ``(alpha, f, grad, evals)`` or ``None`` plus evals on failure.
    With ``refine`` an accepted step is followed by one secant step to the
    zero of the directional slope, kept only if it also satisfies the
    Wolfe conditions and lowers the objective. The secant step is exact on
    quadratics, which restores finite termination there.
    """
    found = _wolfe(fun, x, f0, g, d, alpha0, c1, c2, max_evals)
    if not refine or found[0] is None:
        return found
    alpha, f_a, gr, evals = found
    g0 = float(g @ d)
    s_a = float(gr @ d)
    if abs(s_a) <= 1e-12 * abs(g0) or s_a == g0:
        return found
    t = alpha * g0 / (g0 - s_a)
    if not (np.isfinite(t) and t > 0):
        return found
    f_t, gr_t = fun(x + t * d)
    evals += 1
    if not np.isfinite(f_t) or not np.all(np.isfinite(gr_t)):
        return alpha, f_a, gr, evals
    s_t = float(gr_t @ d)
    if f_t < f_a and f_t <= f0 + c1 * t * g0 and abs(s_t) <= -c2 * g0:
        return t, f_t, gr_t, evals
    return alpha, f_a, gr, evals


def _wolfe(fun, x, f0, g, d, alpha0, c1, c2, max_evals):
    g0 = float(g @ d)
    evals = [0]

    def phi(a):
        evals[0] += 1
        f, gr = fun(x + a * d)
        slope = float(gr @ d) if np.all(np.isfinite(gr)) else np.nan
        return f, slope, gr

    a_prev, f_prev, s_prev = 0.0, f0, g0
    a = alpha0
    for i in range(max_evals):
        f_a, s_a, gr = phi(a)
        if not np.isfinite(f_a) or not np.isfinite(s_a):
            # overshoot into a non-finite region: shrink and retry
            a = 0.5 * (a_prev + a)
            continue
        if f_a > f0 + c1 * a * g0 or (i > 0 and f_a >= f_prev):
            hit = _zoom(phi, (a_prev, f_prev, s_prev), (a, f_a, s_a), f0, g0, c1, c2,
                        max_evals - evals[0])
            return (hit + (evals[0],)) if hit else (None, evals[0])
        if abs(s_a) <= -c2 * g0:
            return a, f_a, gr, evals[0]
        if s_a >= 0:
            hit = _zoom(phi, (a, f_a, s_a), (a_prev, f_prev, s_prev), f0, g0, c1, c2,
                        max_evals - evals[0])
            return (hit + (evals[0],)) if hit else (None, evals[0])
        a_prev, f_prev, s_prev = a, f_a, s_a
        a = 2.0 * a
    return None, evals[0]


def lbfgs_minimize(fun, x0, max_iters=100, tolerance=1e-8, state=None, callback=None):
    """Minimize ``fun(x) -> (f, grad)`` from ``x0``.

    Stops when ``||grad|| <= tolerance`` or after ``max_iters`` accepted
    steps. A failed line search is retried once along steepest descent with
    the memory cleared; a second consecutive failure ends the run with
    status ``"line-search-failed"``. ``trace`` holds the objective after
    every accepted step, starting with the initial value.
    """
    state = state if state is not None else LbfgsState()
    x = np.array(x0, dtype=np.float64)
    f, g = fun(x)
    evals = 1
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise NumericError(f"objective is not finite at the starting point (f={f})")
    trace = [float(f)]
    gnorm = float(np.linalg.norm(g))
    status = "max-iterations"
    it = 0
    fallback = False
    while it < max_iters:
        if gnorm <= tolerance:
            status = "converged"
            break
        if fallback:
            d = -g
        else:
            d = state.direction(g)
            if not float(g @ d) < 0:
                state.reset()
                d = -g
        alpha0 = 1.0 if state.s_hist else min(1.0, 1.0 / gnorm)
        res = wolfe_search(fun, x, f, g, d, alpha0, state.c1, state.c2, state.max_evals,
                           state.refine)
        evals += res[-1]
        if res[0] is None:
            if fallback:
                status = "line-search-failed"
                break
            fallback = True
            state.reset()
            continue
        fallback = False
        alpha, f_new, g_new = res[0], res[1], res[2]
        s = alpha * d
        state.push(s, g_new - g)
        x = x + s
        f, g = f_new, g_new
        gnorm = float(np.linalg.norm(g))
        trace.append(float(f))
        it += 1
        if callback is not None:
            callback(it, x, f, g)
    else:
        if gnorm <= tolerance:
            status = "converged"
    return LbfgsResult(x, float(f), gnorm, it, evals, status, trace)


def lbfgs_run(net, mask, points, problem, max_iters, tolerance=1e-9, mode="sa",
              c_weight=1.0, state=None, tape=None, callback=None):
    """Fine-tune ``net`` in place with the mask held fixed.

    Returns ``(net, result)``; ``result.trace`` is the loss after every
    accepted step.
    """
    x0 = net.to_vector()
    work = net.copy()

    def fun(theta):
        work.set_vector(theta)
        try:
            ev = evaluate(work, mask, points, problem, mode, c_weight, params_grad=True,
                          mask_grad=False, tape=tape)
        except NumericError:
            return np.inf, np.full_like(theta, np.nan)
        grad = np.concatenate([g.ravel() for g in ev.param_grads])
        return ev.breakdown.total, grad

    if max_iters <= 0:
        f, g = fun(x0)
        return net, LbfgsResult(x0, float(f), float(np.linalg.norm(g)), 0, 1, "max-iterations", [float(f)])
    result = lbfgs_minimize(fun, x0, max_iters, tolerance, state, callback)
    net.set_vector(result.x)
    return net, result
