"""From-scratch optimizers for full-batch training: Adam warm-up followed
by limited-memory BFGS with a strong-Wolfe line search."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["TrainingConfig", "xavier_init", "adam_minimize", "lbfgs_minimize",
           "OptimResult"]


@dataclass
class TrainingConfig:
    adam_iters: int = 5000
    adam_lr: float = 0.001
    adam_betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    lbfgs_max_iters: int = 20000
    lbfgs_memory: int = 50
    wolfe: tuple = (1e-4, 0.9)
    grad_tol: float = 1e-8
    loss_tol: float = 0.0
    seed: int = 0

    def __post_init__(self):
        b1, b2 = self.adam_betas
        c1, c2 = self.wolfe
        if not (self.adam_lr > 0 and 0 < b1 < b2 < 1):
            raise ValueError("invalid Adam settings")
        if not (self.lbfgs_memory >= 1 and 0 < c1 < c2 < 1):
            raise ValueError("invalid L-BFGS settings")


@dataclass
class OptimResult:
    x: np.ndarray
    loss: float
    iterations: int
    status: str
    history: list = field(default_factory=list)  # (iter, loss, grad_norm)


def xavier_init(layer_shapes, seed) -> np.ndarray:
    """Flat parameter vector: Xavier-uniform weights, zero biases.

    ``layer_shapes`` is a list of (out, in); the flat layout per layer is
    row-major W followed by b.
    """
    rng = np.random.default_rng(seed)
    chunks = []
    for out, fan_in in layer_shapes:
        bound = np.sqrt(6.0 / (fan_in + out))
        chunks.append(rng.uniform(-bound, bound, out * fan_in))
        chunks.append(np.zeros(out))
    return np.concatenate(chunks) if chunks else np.zeros(0)


def adam_minimize(fun, x0: np.ndarray, config: TrainingConfig, callback=None) -> OptimResult:
    """Bias-corrected Adam for ``config.adam_iters`` full-batch steps.

    ``fun(x) -> (loss, grad)``.  Aborts on non-finite loss or gradient.
    """
    x = x0.copy()
    b1, b2 = config.adam_betas
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    history = []
    loss = np.inf
    for it in range(1, config.adam_iters + 1):
        loss, g = fun(x)
        if not (np.isfinite(loss) and np.all(np.isfinite(g))):
            raise FloatingPointError(f"non-finite loss/gradient at Adam step {it}")
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1**it)
        vhat = v / (1 - b2**it)
        x -= config.adam_lr * mhat / (np.sqrt(vhat) + config.adam_eps)
        gn = float(np.linalg.norm(g))
        history.append((it, float(loss), gn))
        if callback:
            callback(it, float(loss), gn)
    if config.adam_iters:
        loss, _ = fun(x)
    return OptimResult(x, float(loss), config.adam_iters, "max_iters", history)


def _cubic_min(a, fa, ga, b, fb, gb):
    """Minimizer of the cubic interpolant on [a, b]; None if degenerate."""
    d1 = ga + gb - 3 * (fa - fb) / (a - b)
    disc = d1 * d1 - ga * gb
    if disc < 0:
        return None
    d2 = np.sign(b - a) * np.sqrt(disc)
    denom = gb - ga + 2 * d2
    if denom == 0:
        return None
    t = b - (b - a) * (gb + d2 - d1) / denom
    lo, hi = min(a, b), max(a, b)
    if not (lo < t < hi) or not np.isfinite(t):
        return None
    return t


def _strong_wolfe(phi, phi0, dphi0, c1, c2, alpha0=1.0, max_evals=25):
    """Line search enforcing f(a) <= f(0) + c1 a f'(0) and
    |f'(a)| <= c2 |f'(0)| (Nocedal-Wright bracket + zoom)."""
    alpha_prev, f_prev, g_prev = 0.0, phi0, dphi0
    alpha = alpha0
    lo = hi = None
    for _ in range(max_evals):
        f, g = phi(alpha)
        if f > phi0 + c1 * alpha * dphi0 or (alpha_prev > 0 and f >= f_prev):
            lo, hi = (alpha_prev, f_prev, g_prev), (alpha, f, g)
            break
        if abs(g) <= -c2 * dphi0:
            return alpha, f, g, "ok"
        if g >= 0:
            lo, hi = (alpha, f, g), (alpha_prev, f_prev, g_prev)
            break
        alpha_prev, f_prev, g_prev = alpha, f, g
        alpha *= 2.0
    else:
        return alpha_prev, f_prev, g_prev, "fail"

    # zoom
    for _ in range(max_evals):
        a_lo, f_lo, g_lo = lo
        a_hi, f_hi, g_hi = hi
        trial = _cubic_min(a_lo, f_lo, g_lo, a_hi, f_hi, g_hi)
        width = abs(a_hi - a_lo)
        if trial is None or abs(trial - a_lo) < 0.1 * width or abs(trial - a_hi) < 0.1 * width:
            trial = 0.5 * (a_lo + a_hi)
        f, g = phi(trial)
        if f > phi0 + c1 * trial * dphi0 or f >= f_lo:
            hi = (trial, f, g)
        else:
            if abs(g) <= -c2 * dphi0:
                return trial, f, g, "ok"
            if g * (a_hi - a_lo) >= 0:
                hi = lo
            lo = (trial, f, g)
        if width < 1e-14:
            break
    a_lo, f_lo, g_lo = lo
    return a_lo, f_lo, g_lo, "fail" if a_lo == 0.0 else "ok"


def lbfgs_minimize(fun, x0: np.ndarray, config: TrainingConfig, callback=None) -> OptimResult:
    """Limited-memory BFGS with two-loop recursion and strong-Wolfe steps.

    Stops on gradient norm, relative loss change, iteration cap, or line
    search failure; the best-seen iterate is always returned (the losses
    are nonconvex and plateaus are normal).
    """
    x = x0.copy()
    f, g = fun(x)
    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        raise FloatingPointError("non-finite loss/gradient at L-BFGS start")
    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    rho_hist: list[float] = []
    history = [(0, float(f), float(np.linalg.norm(g)))]
    best_x, best_f = x.copy(), f
    status = "max_iters"
    it = 0
    for it in range(1, config.lbfgs_max_iters + 1):
        # two-loop recursion
        q = g.copy()
        alphas = []
        for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
            a = rho * (s @ q)
            alphas.append(a)
            q -= a * y
        if y_hist:
            gamma = (s_hist[-1] @ y_hist[-1]) / (y_hist[-1] @ y_hist[-1])
            q *= gamma
        for (s, y, rho), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
            q += (a - rho * (y @ q)) * s
        d = -q
        dphi0 = float(g @ d)
        if dphi0 >= 0:
            # not a descent direction; reset memory and steepest-descend
            s_hist, y_hist, rho_hist = [], [], []
            d = -g
            dphi0 = float(g @ d)
            if dphi0 == 0:
                status = "converged_grad"
                break

        cache = {}

        def phi(a):
            xt = x + a * d
            ft, gt = fun(xt)
            cache[a] = (xt, ft, gt)
            return ft, float(gt @ d)

        alpha, f_new, _, ls_status = _strong_wolfe(
            phi, f, dphi0, config.wolfe[0], config.wolfe[1]
        )
        if ls_status == "fail" or alpha == 0.0 or alpha not in cache:
            status = "line_search_failed"
            break
        x_new, f_new, g_new = cache[alpha]
        if not (np.isfinite(f_new) and np.all(np.isfinite(g_new))):
            status = "non_finite"
            break
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            s_hist.append(s)
            y_hist.append(y)
            rho_hist.append(1.0 / sy)
            if len(s_hist) > config.lbfgs_memory:
                s_hist.pop(0)
                y_hist.pop(0)
                rho_hist.pop(0)
        rel_drop = abs(f - f_new) / max(abs(f), 1e-30)
        x, f, g = x_new, f_new, g_new
        gn = float(np.linalg.norm(g))
        history.append((it, float(f), gn))
        if callback:
            callback(it, float(f), gn)
        if f < best_f:
            best_f, best_x = f, x.copy()
        if gn <= config.grad_tol:
            status = "converged_grad"
            break
        if config.loss_tol > 0 and rel_drop <= config.loss_tol:
            status = "converged_loss"
            break
    if f > best_f:
        x, f = best_x, best_f
    return OptimResult(x, float(f), it, status, history)
