"""
Multiplicative functional, Malliavin gradient and damped gradient on sampled paths.

Discrete functional
-------------------
Write ``Pi_k = I - 1{on_boundary[k]} P_{U_k}`` and
``R_k = Ric^Z(U_k) dt + II(U_{k+1}) dl[k+1]`` (the boundary term uses the point
where the local time accrued).  For a base index ``s``

    Q[k] = Qhat[k] Pi_k,   Qhat[s] = I,   Qhat[k+1] = Qhat[k] M_k

with ``M_k = Pi_k (I - R_k)`` when the projection is applied at every boundary
event (the default) and ``M_k = I - Pi_k R_k`` when it is applied only at the
terminal time, which is the literal discretisation of the defining integral
equation.  All quantities are in frame coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, PreconditionError
from .sampler import PathBatch, as_batch

PROJECTION_MODES = ("every", "terminal")


@dataclass
class CylinderPointwise:
    """``F(gamma) = f(gamma_{t_1}, ..., gamma_{t_N})`` with a registered gradient.

    ``value(points)`` maps ``(P, N, m)`` chart points to ``(P,)``;
    ``gradient(points)`` returns the chart differentials ``(P, N, m)``.
    """

    times: Sequence[float]
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    lipschitz: float = float("inf")
    name: str = "f"

    def __post_init__(self):
        self.times = tuple(float(t) for t in self.times)
        if len(self.times) < 1:
            raise ValueError("need at least one time")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("times must be strictly increasing")
        if self.times[0] <= 0:
            raise ValueError("times must lie in (0, T]")

    def indices(self, grid) -> np.ndarray:
        """Snap the times to the grid."""
        if self.times[-1] > grid.T * (1 + 1e-12):
            raise ValueError(f"time {self.times[-1]} beyond T={grid.T}")
        idx = np.array([grid.index_of(t) for t in self.times])
        if idx[0] < 1 or np.any(np.diff(idx) <= 0):
            raise ValueError("cylinder times collapse after snapping to the grid; refine the grid")
        return idx

    def evaluate(self, paths) -> np.ndarray:
        batch = as_batch(paths)
        idx = self.indices(batch.grid)
        return np.asarray(self.value(batch.points[:, idx]), dtype=float)

    def chart_gradient(self, points) -> np.ndarray:
        if self.gradient is None:
            raise ConfigurationError(f"no gradient registered for {self.name!r}")
        return np.asarray(self.gradient(points), dtype=float)


@dataclass
class GradientField:
    """Vectors ``g[k]`` at grid times; shape ``(P, n+1, d)``."""

    g: np.ndarray
    flavor: str

    def norms_sq(self) -> np.ndarray:
        return np.sum(self.g * self.g, axis=-1)


@dataclass
class QProcess:
    """``Q_{s, t_k}`` for ``k = s..n``; ``matrices`` has shape ``(P, n+1-s, d, d)``."""

    base: int
    matrices: np.ndarray
    projection: str

    def at(self, k: int) -> np.ndarray:
        return self.matrices[:, k - self.base]


def boundary_projection(frame, normal, metric_factor=1.0) -> np.ndarray:
    """Rank-one projector ``P_u a = <u a, N> u^{-1} N`` in frame coordinates.

    ``frame`` is ``(..., m, d)``, ``normal`` a unit inward normal ``(..., m)``;
    ``metric_factor`` is the conformal factor of the chart metric.
    """
    frame = np.asarray(frame, dtype=float)
    normal = np.asarray(normal, dtype=float)
    lam2 = np.broadcast_to(np.asarray(metric_factor, dtype=float) ** 2, normal.shape[:-1])
    length = np.sqrt(lam2 * np.sum(normal * normal, axis=-1))
    if np.any(np.abs(length - 1.0) > 1e-8):
        raise PreconditionError("normal vector is not of unit length")
    nf = np.einsum("...md,...m->...d", frame, normal) * lam2[..., None]
    return nf[..., :, None] * nf[..., None, :]


def _projectors(batch: PathBatch) -> np.ndarray:
    """``Pi_k`` for every path and index, ``(P, n+1, d, d)``."""
    P, n1 = batch.on_boundary.shape
    d = batch.model.dim
    Pi = np.broadcast_to(np.eye(d), (P, n1, d, d)).copy()
    hit = batch.on_boundary
    if np.any(hit):
        nf = batch.model.normal_in_frame(batch.points[hit], batch.frames[hit])
        Pi[hit] -= nf[:, :, None] * nf[:, None, :]
    return Pi


def _generators(batch: PathBatch) -> np.ndarray:
    """``R_k`` for ``k = 0..n-1``, ``(P, n, d, d)``."""
    model = batch.model
    dt = batch.grid.dt
    P, n1 = batch.dl.shape
    d = model.dim
    R = model._ric(batch.points[:, :-1]) * dt
    hit = batch.dl[:, 1:] > 0
    if np.any(hit):
        pts = batch.points[:, 1:][hit]
        frs = batch.frames[:, 1:][hit]
        R[hit] += model._sff(pts, frs) * batch.dl[:, 1:][hit][:, None, None]
    return R


def step_matrices(paths, projection: str = "every"):
    """Return ``(M, Pi)`` with ``M_k`` the one-step factor of ``Qhat``."""
    if projection not in PROJECTION_MODES:
        raise ValueError(f"projection must be one of {PROJECTION_MODES}")
    batch = as_batch(paths)
    Pi = _projectors(batch)
    R = _generators(batch)
    d = batch.model.dim
    eye = np.eye(d)
    if projection == "every":
        M = Pi[:, :-1] @ (eye - R)
    else:
        M = eye - Pi[:, :-1] @ R
    return M, Pi


def q_evolve(paths, model=None, base: int = 0, projection: str = "every") -> QProcess:
    """Forward evolution of ``Q_{s, .}`` from base index ``s``."""
    batch = as_batch(paths)
    M, Pi = step_matrices(batch, projection)
    P, n1 = batch.dl.shape
    d = batch.model.dim
    out = np.empty((P, n1 - base, d, d))
    qhat = np.broadcast_to(np.eye(d), (P, d, d)).copy()
    out[:, 0] = Pi[:, base]
    for k in range(base, n1 - 1):
        qhat = qhat @ M[:, k]
        out[:, k + 1 - base] = qhat @ Pi[:, k + 1]
    return QProcess(base=base, matrices=out, projection=projection)


def backward_accumulate(M: np.ndarray, Pi: np.ndarray, sources: np.ndarray) -> np.ndarray:
    """``S_k = sum_{j>k} Q_{k,j} src_j`` for all ``k``, by the backward recursion

    ``S_k = M_k (S_{k+1} + Pi_{k+1} src_{k+1})``, ``S_n = 0``.
    """
    P, n1, d = sources.shape
    S = np.zeros((P, n1, d))
    acc = np.zeros((P, d))
    for k in range(n1 - 2, -1, -1):
        acc = np.einsum("pij,pj->pi", M[:, k],
                        acc + np.einsum("pij,pj->pi", Pi[:, k + 1], sources[:, k + 1]))
        S[:, k] = acc
    return S


def _frame_vectors(batch: PathBatch, F: CylinderPointwise):
    """``(idx, v)`` with ``v_i = U_{t_i}^{-1} grad_i f`` of shape ``(P, N, d)``."""
    idx = F.indices(batch.grid)
    grads = F.chart_gradient(batch.points[:, idx])
    v = batch.model.frame_gradient(batch.frames[:, idx], grads)
    return idx, v


def _event_sources(batch: PathBatch, idx, v) -> np.ndarray:
    P, n1 = batch.dl.shape
    src = np.zeros((P, n1, v.shape[-1]))
    for col, j in enumerate(idx):
        src[:, j] += v[:, col]
    return src


def malliavin_gradient(paths, F: CylinderPointwise) -> GradientField:
    """``D_k F = sum_{i: t_i > t_k} Pi_{t_i} U_{t_i}^{-1} grad_i f``."""
    batch = as_batch(paths)
    idx, v = _frame_vectors(batch, F)
    Pi = _projectors(batch)
    src = np.einsum("pnij,pnj->pni", Pi, _event_sources(batch, idx, v))
    # strict inequality t_i > t_k: reverse cumulative sum shifted by one
    tail = np.cumsum(src[:, ::-1], axis=1)[:, ::-1]
    g = np.zeros_like(tail)
    g[:, :-1] = tail[:, 1:]
    return GradientField(g=g, flavor="malliavin")


def damped_gradient(paths, F: CylinderPointwise, projection: str = "every") -> GradientField:
    """``D~_k F = sum_{i: t_i > t_k} Q_{t_k, t_i} U_{t_i}^{-1} grad_i f``."""
    batch = as_batch(paths)
    idx, v = _frame_vectors(batch, F)
    M, Pi = step_matrices(batch, projection)
    g = backward_accumulate(M, Pi, _event_sources(batch, idx, v))
    return GradientField(g=g, flavor="damped")


def identity_residual(paths, F: CylinderPointwise, projection: str = "every") -> np.ndarray:
    """Per-path residual of the damped/Malliavin identity.

    ``max_k |D~_k - (D_k - sum_{j>k} Q_{k,j} (Ric_j D_j dt + II_j D_j dl_j))|``.
    """
    batch = as_batch(paths)
    model = batch.model
    D = malliavin_gradient(batch, F).g
    Dt = damped_gradient(batch, F, projection).g
    M, Pi = step_matrices(batch, projection)
    dt = batch.grid.dt
    w = np.einsum("pnij,pnj->pni", model._ric(batch.points), D) * dt
    hit = batch.dl > 0
    if np.any(hit):
        II = model._sff(batch.points[hit], batch.frames[hit])
        w[hit] += np.einsum("hij,hj->hi", II, D[hit]) * batch.dl[hit][:, None]
    # sources enter as Pi_j w_j in the recursion; Q_{k,j} already ends in Pi_j
    Y = backward_accumulate(M, Pi, w)
    r = np.linalg.norm(Dt - (D - Y), axis=-1)
    return r.max(axis=1)


def check_identity_2_4(paths, F: CylinderPointwise, projection: str = "every") -> float:
    """Largest identity residual over the supplied paths."""
    return float(np.max(identity_residual(paths, F, projection)))


def q_norm_ratio(paths, bounds, base: int = 0, projection: str = "every") -> np.ndarray:
    """``||Q_{s,k}||_op / exp(-K2 (t_k - t_s) - sigma2 (l_k - l_s))`` for every k."""
    batch = as_batch(paths)
    q = q_evolve(batch, base=base, projection=projection)
    norms = np.linalg.norm(q.matrices, ord=2, axis=(-2, -1))
    t = batch.grid.times[base:]
    lt = batch.local_time[:, base:]
    env = np.exp(-bounds.K2 * (t - t[0])[None, :] - bounds.sigma2 * (lt - lt[:, :1]))
    return norms / env


def domination_excess(paths, F: CylinderPointwise, bounds, projection: str = "every") -> np.ndarray:
    """``|D~_k| - |D_k| - sum_{j>k} |D_j| mu_k(j)`` for all paths and k."""
    batch = as_batch(paths)
    D = np.linalg.norm(malliavin_gradient(batch, F).g, axis=-1)
    Dt = np.linalg.norm(damped_gradient(batch, F, projection).g, axis=-1)
    a = bounds.K2 * batch.grid.times[None, :] + bounds.sigma2 * batch.local_time
    dens = bounds.ric_norm * batch.grid.dt + bounds.sff_norm * batch.dl
    P, n1 = D.shape
    # mu_k(j) = exp(a_k - a_j) dens_j for j > k
    shift = a.max(axis=1, keepdims=True)
    w = np.exp(shift - a) * dens * D
    tail = np.cumsum(w[:, ::-1], axis=1)[:, ::-1]
    tail = np.concatenate([tail[:, 1:], np.zeros((P, 1))], axis=1)
    return Dt - D - np.exp(a - shift) * tail
