"""
Explicit constants of the path-space inequalities.

Closed forms are evaluated through ``exprel`` so that the ``K2 -> 0`` (and
``K -> 0``) limits are continuous and free of cancellation:

    (1 - exp(-K s)) / K = s * exprel(-K s)

which is ``beta * (1 - exp(-K2 s)) / c`` with ``c = |K1| v |K2|``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import exprel

from .geometry import CurvatureBounds
from .sampler import PathBatch, as_batch

GRID_POINTS = 100_001


def _rate_integral(K, s):
    """``int_0^s exp(-K u) du``, continuous in ``K``."""
    s = np.asarray(s, dtype=float)
    return s * exprel(-K * s)


def beta(K1: float, K2: float) -> float:
    """``(|K1| v |K2|) / K2``; negative when ``K2 < 0``."""
    if K2 == 0:
        raise ZeroDivisionError("beta is undefined for K2 = 0")
    return max(abs(K1), abs(K2)) / K2


# ---------------------------------------------------------------------------
# path functionals
# ---------------------------------------------------------------------------

def _exponent(batch: PathBatch, bounds: CurvatureBounds):
    """``a_k = K2 t_k + sigma2 l_k`` so that weights are ``exp(a_k - a_j)``."""
    t = batch.grid.times
    return bounds.K2 * t[None, :] + bounds.sigma2 * batch.local_time


def mu_masses(paths, bounds: CurvatureBounds) -> np.ndarray:
    """``mu_{t_k}([t_k, T])`` for every grid index; shape ``(P, n+1)``.

    ``sum_{j>k} exp(-K2 (t_j - t_k) - sigma2 (l_j - l_k)) [c_K dt + c_s dl_j]``.
    """
    batch = as_batch(paths)
    a = _exponent(batch, bounds)
    dt = batch.grid.dt
    dens = bounds.ric_norm * dt + bounds.sff_norm * batch.dl
    dens[:, 0] = 0.0
    # weight matrix is separable; the shift keeps exponentials in range
    shift = a.max(axis=1, keepdims=True)
    w = np.exp(shift - a) * dens
    tail = np.cumsum(w[:, ::-1], axis=1)[:, ::-1]
    tail = np.concatenate([tail[:, 1:], np.zeros((tail.shape[0], 1))], axis=1)
    return np.exp(a - shift) * tail


def mu_mass(paths, bounds: CurvatureBounds, k: int) -> np.ndarray:
    out = mu_masses(paths, bounds)[:, k]
    return out[0] if out.shape[0] == 1 else out


@dataclass
class PathConstants:
    """``A_k`` and ``B_k`` on the grid; arrays of shape ``(P, n+1)``."""

    A: np.ndarray
    B: np.ndarray
    mu: np.ndarray


def compute_A_B(paths, bounds: CurvatureBounds) -> PathConstants:
    """Left-endpoint sums for the weights of the path-space Dirichlet form.

    ``A_k = (1 + mu_k) + sum_{r<k} (1 + mu_r) phi1(r, k) dt`` and
    ``B_k = sum_{r<k} (1 + mu_r) phi2(r, k) dt`` with
    ``phi1 = c_K e^{-K2 (t_k - t_r) - sigma2 (l_k - l_r)}`` and ``phi2`` the same
    with ``c_sigma``.
    """
    batch = as_batch(paths)
    mu = mu_masses(batch, bounds)
    a = _exponent(batch, bounds)
    dt = batch.grid.dt
    shift = a.min(axis=1, keepdims=True)
    w = (1.0 + mu) * np.exp(a - shift) * dt
    head = np.cumsum(w, axis=1) - w          # sum over r < k
    core = np.exp(shift - a) * head
    A = 1.0 + mu + bounds.ric_norm * core
    B = bounds.sff_norm * core
    return PathConstants(A=A, B=B, mu=mu)


# ---------------------------------------------------------------------------
# Lambda(t, T) and its supremum
# ---------------------------------------------------------------------------

def lambda_fn(t, T: float, K1: float, K2: float):
    """``Lambda(t, T)``; ``K2 = 0`` gives the analytic limit.

    Rearranged as ``1 + b(T - t) + b(t) + b(t) (b(T - t) + b(T)) / 2`` with
    ``b(s) = beta (1 - e^{-K2 s})``.
    """
    c = max(abs(K1), abs(K2))
    t = np.asarray(t, dtype=float)

    def b(s):
        return c * _rate_integral(K2, s)

    out = 1.0 + b(T - t) + b(t) + 0.5 * b(t) * (b(T - t) + b(T))
    return float(out) if out.ndim == 0 else out


def lambda_derivative(t, T, K1, K2):
    """``d/dt Lambda(t, T)``."""
    c = max(abs(K1), abs(K2))
    t = np.asarray(t, dtype=float)
    bT = c * _rate_integral(K2, T)
    e_t, e_r = np.exp(-K2 * t), np.exp(-K2 * (T - t))
    bt, br = c * _rate_integral(K2, t), c * _rate_integral(K2, T - t)
    out = -c * e_r + c * e_t + 0.5 * (c * e_t * (br + bT) - bt * c * e_r)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LambdaSup:
    t_star: float
    value: float
    method: str  # "closed-form" or "grid"


def stationary_time(T: float, K1: float, K2: float) -> float:
    """Interior critical point of ``Lambda(., T)`` for ``K2 > 0``."""
    if not K2 > 0:
        raise ValueError("the interior maximiser exists only for K2 > 0")
    b = beta(K1, K2)
    rhs = np.log1p(b / (2.0 + b) * -np.expm1(-K2 * T)) + K2 * T
    return rhs / (2.0 * K2)


def sup_lambda_closed_form_k2_pos(T, K1, K2) -> float:
    """Supremum for ``K2 > 0`` as the two-term expression with ``sqrt(S)``."""
    b = beta(K1, K2)
    w = np.exp(-K2 * T)
    S = 1.0 + b / (2.0 + b) * (1.0 - w)
    h = np.exp(-K2 * T / 2.0)
    return ((1.0 + b) ** 2 - (b + b * b / 2.0) * np.sqrt(S) * h
            - (b + b * b - b * b / 2.0 * w) / np.sqrt(S) * h)


def grid_sup_lambda(T, K1, K2, n: int = GRID_POINTS) -> LambdaSup:
    t = np.linspace(0.0, T, n)
    vals = lambda_fn(t, T, K1, K2)
    i = int(np.argmax(vals))
    return LambdaSup(t_star=float(t[i]), value=float(vals[i]), method="grid")


def sup_lambda(T: float, K1: float, K2: float) -> LambdaSup:
    """``sup_{t in [0, T]} Lambda(t, T)`` with its maximiser."""
    if K2 < 0:
        return LambdaSup(t_star=float(T), value=float(lambda_fn(T, T, K1, K2)),
                         method="closed-form")
    if K2 > 0:
        t0 = float(stationary_time(T, K1, K2))
        return LambdaSup(t_star=t0, value=float(sup_lambda_closed_form_k2_pos(T, K1, K2)),
                         method="closed-form")
    return grid_sup_lambda(T, K1, K2)


def spectral_gap_bound_k2_pos(T, K1, K2) -> float:
    """The single-square-root form of the ``K2 > 0`` bound."""
    b = beta(K1, K2)
    w = np.exp(-K2 * T)
    return (1.0 + b) ** 2 - 2.0 * np.sqrt((b + b * b / 2.0) * (b + b * b - b * b / 2.0 * w)) * np.exp(-K2 * T / 2.0)


def spectral_gap_bound(T: float, K1: float, K2: float) -> float:
    """Upper bound on the inverse spectral gap of the path-space O-U operator."""
    if K2 < 0:
        b = beta(K1, K2)
        return 0.5 + 0.5 * (1.0 + b * (1.0 - np.exp(-K2 * T))) ** 2
    if K2 > 0:
        return float(spectral_gap_bound_k2_pos(T, K1, K2))
    return grid_sup_lambda(T, K1, K2).value


def published_forms_gap(T, K1, K2) -> float:
    """Difference between the two published ``K2 > 0`` supremum formulas."""
    return float(sup_lambda_closed_form_k2_pos(T, K1, K2) - spectral_gap_bound_k2_pos(T, K1, K2))


# ---------------------------------------------------------------------------
# heat-process constants
# ---------------------------------------------------------------------------

def heat_phi(s, T: float, K: float, sigma: float = 0.0, path=None):
    """``phi(s) = int_s^T exp(-K (u - s) - sigma (l_u - l_s)) du``.

    Without a path the local-time factor is dropped (the convex bound).  With a
    path, returns left-endpoint sums on the grid for every index, shape
    ``(P, n+1)``; ``s`` is ignored then.
    """
    if path is None:
        return _rate_integral(K, np.asarray(T, dtype=float) - np.asarray(s, dtype=float))
    batch = as_batch(path)
    a = K * batch.grid.times[None, :] + sigma * batch.local_time
    dt = batch.grid.dt
    shift = a.max(axis=1, keepdims=True)
    w = np.exp(shift - a) * dt
    w[:, -1] = 0.0                       # u ranges over t_0..t_{n-1}
    tail = np.cumsum(w[:, ::-1], axis=1)[:, ::-1]
    return np.exp(a - shift) * tail


def heat_A_path(path, T: float, K: float, sigma: float) -> np.ndarray:
    """Path-dependent ``A_u = sum_{k<=u} phi_k exp(-K (t_u - t_k) - sigma (l_u - l_k)) dt``."""
    batch = as_batch(path)
    phi = heat_phi(None, T, K, sigma, path=batch)
    a = K * batch.grid.times[None, :] + sigma * batch.local_time
    shift = a.min(axis=1, keepdims=True)
    head = np.cumsum(phi * np.exp(a - shift) * batch.grid.dt, axis=1)
    return np.exp(shift - a) * head


def heat_A(s, T: float, K: float):
    """Closed-form ``A(s)`` for a convex boundary; ``K = 0`` is the limit ``Ts - s^2/2``.

    Written as ``1/2 * r(s) * (r(T - s) + r(T))`` with ``r(x) = (1 - e^{-Kx}) / K``.
    """
    s = np.asarray(s, dtype=float)
    out = 0.5 * _rate_integral(K, s) * (_rate_integral(K, T - s) + _rate_integral(K, T))
    return float(out) if out.ndim == 0 else out


def heat_A_literal(s, T, K):
    """The displayed form ``(2 - 2e^{-Ks} + e^{-K(T+s)} - e^{-K(T-s)}) / (2K^2)``."""
    s = np.asarray(s, dtype=float)
    return (2 - 2 * np.exp(-K * s) + np.exp(-K * (T + s)) - np.exp(-K * (T - s))) / (2 * K * K)


def heat_A_derivative(s, T, K):
    """``A'(s) = (2e^{-Ks} - e^{-K(T+s)} - e^{-K(T-s)}) / (2K)``, ``K = 0`` limit ``T - s``."""
    s = np.asarray(s, dtype=float)
    if K == 0:
        return T - s
    return (2 * np.exp(-K * s) - np.exp(-K * (T + s)) - np.exp(-K * (T - s))) / (2 * K)


def heat_stationary_point(T: float, K: float):
    """Root of ``e^{2Ks} = 2e^{KT} - 1`` for ``K > 0``; ``None`` otherwise."""
    if not K > 0:
        return None
    return float(np.log1p(2.0 * np.expm1(K * T)) / (2.0 * K))


def heat_C_printed(T: float, K: float) -> float:
    """The displayed convex-boundary constant, evaluated literally (``K != 0``).

    ``K > 0``: ``[2 - (2 - e^{-KT}) / q - e^{-KT} q] / (2K^2)`` with
    ``q = sqrt(2e^{KT} - 1)``; ``K < 0``: ``(1 - e^{-KT})^2 / K^2``.
    Loses precision as ``K -> 0``; ``heat_C`` is the stable evaluation.
    """
    if K < 0:
        return float((1.0 - np.exp(-K * T)) ** 2 / K ** 2)
    w = np.exp(-K * T)
    q = np.sqrt(2.0 * np.exp(K * T) - 1.0)
    return float((2.0 - (2.0 - w) / q - w * q) / (2.0 * K * K))


def heat_C(T: float, K: float) -> float:
    """The two-case constant of the convex-boundary corollary.

    For ``K > 0`` the printed expression equals ``A(s0)`` at the stationary
    point, which is how it is evaluated here; ``K < 0`` gives
    ``(1 - e^{-KT})^2 / K^2``; ``K = 0`` is the ``K -> 0+`` limit ``T^2 / 2``.
    """
    if K < 0:
        return float(_rate_integral(K, T) ** 2)
    if K == 0:
        return 0.5 * T * T
    return float(heat_A(heat_stationary_point(T, K), T, K))


def heat_sup_A(T: float, K: float) -> float:
    """``sup_{s in [0, T]} A(s)`` of the closed form."""
    s0 = heat_stationary_point(T, K)
    return float(heat_A(T if s0 is None else s0, T, K))


def heat_lsi_constant(T: float, K: float) -> float:
    """``2 sup_s A(s)``: the constant that pairs with the factor 2 of the heat LSI.

    Equals ``heat_C`` for ``K < 0``, ``T^2`` for ``K = 0`` and ``2 heat_C`` for ``K > 0``.
    """
    return 2.0 * heat_sup_A(T, K)


@dataclass(frozen=True)
class ClosedFormConstants:
    K1: float
    K2: float
    sigma1: float
    sigma2: float
    T: float
    beta: float
    lambda_sup: float
    t_star: float
    lambda_method: str
    spectral_bound: float
    heat_C: float

    def as_row(self):
        return {
            "K1": self.K1, "K2": self.K2, "sigma1": self.sigma1, "sigma2": self.sigma2,
            "T": self.T, "lambda_sup": self.lambda_sup, "t_star": self.t_star,
            "spectral_bound": self.spectral_bound, "heat_C": self.heat_C,
        }


CONSTANTS_COLUMNS = ["K1", "K2", "sigma1", "sigma2", "T", "lambda_sup", "t_star",
                     "spectral_bound", "heat_C"]


def closed_form_constants(bounds: CurvatureBounds, T: float) -> ClosedFormConstants:
    K1, K2 = bounds.K1, bounds.K2
    sl = sup_lambda(T, K1, K2)
    return ClosedFormConstants(
        K1=K1, K2=K2, sigma1=bounds.sigma1, sigma2=bounds.sigma2, T=T,
        beta=beta(K1, K2) if K2 != 0 else float("nan"),
        lambda_sup=sl.value, t_star=sl.t_star, lambda_method=sl.method,
        spectral_bound=float(spectral_gap_bound(T, K1, K2)),
        heat_C=heat_C(T, K2),
    )
