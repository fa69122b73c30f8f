"""Decay-curve fitting ``A r**m + B`` and the derived RB error metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar


@dataclass
class FitResult:
    A: float
    r: float
    B: float
    stderr_A: float = 0.0
    stderr_r: float = 0.0
    stderr_B: float = 0.0
    cov: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    converged: bool = True
    degenerate: bool = False
    n_iter: int = 0
    residual_norm: float = 0.0
    initial_residual_norm: float = 0.0
    message: str = ""


def decay_model(m, A, r, B):
    return A * np.power(r, m) + B


def _jacobian(m, A, r):
    rm = np.power(r, m)
    with np.errstate(divide="ignore", invalid="ignore"):
        d_r = np.where(m > 0, A * m * np.power(r, m - 1.0), 0.0)
    return np.column_stack([rm, d_r, np.ones_like(m)])


def initial_guess(m: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Seed: ``A = p_first - p_last``, ``B = p_last``, ``r`` from a two-point log slope."""
    ms = np.unique(m)
    means = np.array([y[m == k].mean() for k in ms])
    B = float(means[-1])
    A = float(means[0] - means[-1])
    k = max(1, (len(ms) - 1) // 2)
    ratio = (means[k] - B) / A if A != 0 else 0.0
    if 0 < ratio < 1:
        r = float(ratio ** (1.0 / (ms[k] - ms[0])))
    else:
        r = float(0.5 ** (1.0 / max(ms[-1] - ms[0], 1.0)))
    return A, min(max(r, 1e-12), 1.0), B


def _linear_ab(m, y, r):
    X = np.column_stack([np.power(r, m), np.ones_like(m)])
    (A, B), *_ = np.linalg.lstsq(X, y, rcond=None)
    res = X @ np.array([A, B]) - y
    return float(A), float(B), float(res @ res)


def profile_start(m: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Start point from the variable-projection profile over ``r``.

    For fixed ``r`` the model is linear in ``A, B``; the profile cost is
    minimized over ``log(-log r)``, which resolves the nearly linear decays
    (``r -> 1``) where plain LM crawls along a narrow valley.
    """
    span = max(float(m.max() - m.min()), 1.0)
    lo, hi = math.log(1e-6 / span), math.log(20.0 / span)
    res = minimize_scalar(
        lambda u: _linear_ab(m, y, math.exp(-math.exp(u)))[2],
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-10},
    )
    r = math.exp(-math.exp(float(res.x)))
    A, B, _ = _linear_ab(m, y, r)
    return A, r, B


def fit_rb(points, max_iter: int = 200, tol: float = 1e-15) -> FitResult:
    """Levenberg-Marquardt fit of ``A r**m + B`` to ``(m, value)`` pairs.

    Repeated ``m`` values (one per seed) are fitted point by point. ``r`` is kept
    in (0, 1]. If no step can be accepted within ``max_iter`` iterations the best
    point found is returned with ``converged=False``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be (m, value) pairs")
    m, y = pts[:, 0], pts[:, 1]
    if len(np.unique(m)) < 3:
        raise ValueError("need at least 3 distinct sequence lengths")

    A, r, B = initial_guess(m, y)
    if np.ptp(y) <= 1e-13 * max(1.0, abs(y).max()):
        return FitResult(0.0, 1.0, float(y.mean()), degenerate=True, message="constant data")

    p = np.array([A, r, B])

    def resid(q):
        return decay_model(m, q[0], q[1], q[2]) - y

    res = resid(p)
    cost = float(res @ res)
    init_norm = math.sqrt(cost)
    q = np.array(profile_start(m, y))
    r_q = resid(q)
    if float(r_q @ r_q) < cost:
        p, res, cost = q, r_q, float(r_q @ r_q)
    lam = 1e-3
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        J = _jacobian(m, p[0], p[1])
        g = J.T @ res
        JtJ = J.T @ J
        scale = np.diag(JtJ).copy()
        scale[scale == 0] = 1.0
        accepted = False
        while lam < 1e16:
            try:
                step = np.linalg.solve(JtJ + lam * np.diag(scale), -g)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            q = p + step
            q[1] = min(max(q[1], 1e-12), 1.0)
            r_new = resid(q)
            c_new = float(r_new @ r_new)
            if c_new <= cost:
                rel = (cost - c_new) / max(cost, 1e-300)
                p, res, cost = q, r_new, c_new
                lam = max(lam / 3, 1e-12)
                accepted = True
                break
            lam *= 4
        if not accepted:
            converged = True  # no descent direction left: local minimum
            break
        if rel < tol or cost == 0.0 or np.max(np.abs(step) / (np.abs(p) + 1e-30)) < 1e-13:
            converged = True
            break

    n, k = len(y), 3
    J = _jacobian(m, p[0], p[1])
    dof = max(n - k, 1)
    s2 = cost / dof
    try:
        cov = np.linalg.inv(J.T @ J) * s2
    except np.linalg.LinAlgError:
        cov = np.full((3, 3), np.nan)
    se = np.sqrt(np.abs(np.diag(cov)))
    return FitResult(
        A=float(p[0]),
        r=float(p[1]),
        B=float(p[2]),
        stderr_A=float(se[0]),
        stderr_r=float(se[1]),
        stderr_B=float(se[2]),
        cov=cov,
        converged=converged,
        n_iter=it,
        residual_norm=math.sqrt(cost),
        initial_residual_norm=init_norm,
        message="" if converged else "iteration budget exhausted",
    )


# ---------------------------------------------------------------------------
# metrics


def _check_r(r: float) -> None:
    if not 0.0 < r <= 1.0:
        raise ValueError(f"decay parameter must lie in (0, 1], got {r}")


def epc(r: float) -> float:
    """Average error per Clifford, ``(1 - r) / 2``."""
    _check_r(r)
    return 0.5 * (1.0 - r)


def epg(r: float, n_g: float) -> float:
    """Average error per basis gate, ``(1 - r**(1/n_g)) / 2``."""
    _check_r(r)
    if n_g <= 0:
        raise ValueError("n_g must be positive")
    return 0.5 * (1.0 - r ** (1.0 / n_g))


def lpg(r: float, B: float, n_g: float) -> float:
    """Leakage per gate ``(1 - r) B / n_g`` from a fit of the leaked population."""
    _check_r(r)
    if n_g <= 0:
        raise ValueError("n_g must be positive")
    if not 0.0 <= B <= 1.0:
        raise ValueError(f"asymptote must lie in [0, 1], got {B}")
    return (1.0 - r) * B / n_g


def epc_stderr(fit: FitResult) -> float:
    return 0.5 * fit.stderr_r


def epg_stderr(fit: FitResult, n_g: float) -> float:
    return 0.5 * fit.r ** (1.0 / n_g - 1.0) / n_g * fit.stderr_r


def lpg_stderr(fit: FitResult, n_g: float) -> float:
    grad = np.array([0.0, -fit.B / n_g, (1.0 - fit.r) / n_g])
    return float(math.sqrt(max(grad @ fit.cov @ grad, 0.0)))


def interleaved_gate_error(r_standard: float, r_interleaved: float) -> float:
    """``(1 - r_int / r_std) / 2``; negative values are allowed."""
    _check_r(r_standard)
    _check_r(r_interleaved)
    return 0.5 * (1.0 - r_interleaved / r_standard)


def interleaved_gate_error_stderr(std: FitResult, inter: FitResult) -> float:
    a = 0.5 * inter.stderr_r / std.r
    b = 0.5 * inter.r * std.stderr_r / std.r**2
    return math.hypot(a, b)
