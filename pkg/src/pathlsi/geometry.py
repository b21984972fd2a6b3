"""
Model manifolds with closed-form geometry.

Every model exposes the same batched interface: points are arrays of shape
``(..., m)`` where ``m`` is the number of chart/embedding coordinates, frames
are ``(..., m, d)`` with ``d`` orthonormal tangent columns, and tangent
increments in frame coordinates are ``(..., d)``.

Charts
------
HalfLine, HalfSpace, Ball
    Cartesian coordinates, ``m = d``, flat metric.
Sphere
    Unit sphere embedded in ``R^{d+1}``, ``m = d + 1``.
HyperbolicPlane
    Poincare disk, ``m = d = 2``, metric ``(2 / (1 - |y|^2))^2 I``.

Curvature tensors (``ric_z``, ``second_fundamental_form``) are returned as
``d x d`` matrices acting on orthonormal frame coordinates.  For the shipped
models they are isotropic, so ``ric_z`` does not depend on the frame.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, PreconditionError

POINT_TOL = 1e-10


@dataclass(frozen=True)
class CurvatureBounds:
    """Constant bounds ``K2 <= Ric^Z <= K1`` and ``sigma2 <= II <= sigma1``."""

    K1: float = 0.0
    K2: float = 0.0
    sigma1: float = 0.0
    sigma2: float = 0.0

    def __post_init__(self):
        if self.K2 > self.K1:
            raise ValueError(f"need K2 <= K1, got K2={self.K2}, K1={self.K1}")
        if self.sigma2 > self.sigma1:
            raise ValueError(f"need sigma2 <= sigma1, got {self.sigma2} > {self.sigma1}")

    @property
    def ric_norm(self) -> float:
        return max(abs(self.K1), abs(self.K2))

    @property
    def sff_norm(self) -> float:
        return max(abs(self.sigma1), abs(self.sigma2))

    def contains(self, other: "CurvatureBounds") -> bool:
        """True if ``other``'s intervals lie inside these bounds."""
        return (self.K2 <= other.K2 and other.K1 <= self.K1
                and self.sigma2 <= other.sigma2 and other.sigma1 <= self.sigma1)

    def as_dict(self):
        return {"K1": self.K1, "K2": self.K2, "sigma1": self.sigma1, "sigma2": self.sigma2}


def _rotation_free_identity(d, shape=()):
    return np.broadcast_to(np.eye(d), tuple(shape) + (d, d)).copy()


@dataclass(frozen=True)
class ManifoldModel:
    """Base class; concrete models override the geometric primitives."""

    dim: int

    kind = "abstract"
    has_boundary = False

    @property
    def ambient_dim(self) -> int:
        return self.dim

    @property
    def scale(self) -> float:
        """Length scale used for tolerances."""
        return 1.0

    # -- domain -------------------------------------------------------------
    def contains(self, p, tol: float = POINT_TOL) -> np.ndarray:
        raise NotImplementedError

    def check_point(self, p):
        p = np.asarray(p, dtype=float)
        if p.shape[-1] != self.ambient_dim:
            raise DomainError(f"{self.kind}: expected {self.ambient_dim} coordinates, got {p.shape[-1]}")
        if not np.all(self.contains(p)):
            raise DomainError(f"{self.kind}: point outside the closed domain: {p}")
        return p

    def origin(self) -> np.ndarray:
        raise NotImplementedError

    def metric_factor(self, p) -> np.ndarray:
        """Conformal factor ``lam`` with ``G = lam^2 I`` on tangent vectors."""
        return np.ones(np.shape(p)[:-1])

    def initial_frame(self, p) -> np.ndarray:
        raise NotImplementedError

    # -- curvature ----------------------------------------------------------
    def ricci_constant(self) -> float:
        return 0.0

    def ric_z(self, p) -> np.ndarray:
        """Bakry-Emery tensor ``Ric + grad Z`` in orthonormal coordinates."""
        p = self.check_point(p)
        return self._ric(p)

    def _ric(self, p):
        return self.ricci_constant() * _rotation_free_identity(self.dim, np.shape(p)[:-1])

    def second_fundamental_form(self, p, f) -> np.ndarray:
        p = self.check_point(p)
        if not self.has_boundary:
            raise PreconditionError(f"{self.kind} has no boundary")
        if np.any(self.boundary_gap(p) > self.boundary_tolerance()):
            raise PreconditionError("second fundamental form requested at an interior point")
        return self._sff(p, np.asarray(f, dtype=float))

    def _sff(self, p, f):
        return np.zeros(np.shape(p)[:-1] + (self.dim, self.dim))

    def curvature_bounds(self) -> CurvatureBounds:
        """Exact constant bounds realised by this model."""
        k = self.ricci_constant()
        return CurvatureBounds(K1=k, K2=k)

    # -- boundary -----------------------------------------------------------
    def boundary_tolerance(self) -> float:
        return 1e-9 * self.scale

    def boundary_gap(self, p) -> np.ndarray:
        return np.full(np.shape(p)[:-1], np.inf)

    def inward_normal(self, p) -> np.ndarray:
        raise PreconditionError(f"{self.kind} has no boundary")

    def reflect(self, y):
        """Map a tentative point back into the domain; returns ``(point, dl)``."""
        return y, np.zeros(np.shape(y)[:-1])

    def normal_in_frame(self, p, f) -> np.ndarray:
        """``u^{-1} N``: the inward normal expressed in frame coordinates."""
        n = self._normal_unchecked(p)
        return np.einsum("...md,...m->...d", f, n) * self.metric_factor(p)[..., None] ** 2

    def _normal_unchecked(self, p):
        raise PreconditionError(f"{self.kind} has no boundary")

    # -- motion -------------------------------------------------------------
    def geodesic_step(self, p, f, v):
        """Follow the geodesic with initial velocity ``f v`` for unit time.

        Returns the endpoint and the parallel-transported frame.
        """
        raise NotImplementedError

    def drift_in_frame(self, p, f) -> Optional[np.ndarray]:
        return None

    def frame_gradient(self, f, euclidean_grad) -> np.ndarray:
        """``u^{-1} grad h`` from the chart differential ``dh``.

        ``(u^{-1} grad h)_a = dh(u e_a)``, i.e. ``f^T dh`` in every chart.
        """
        return np.einsum("...md,...m->...d", f, euclidean_grad)

    def describe(self) -> dict:
        return {"kind": self.kind, "dim": self.dim}


# ---------------------------------------------------------------------------
# flat models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HalfSpace(ManifoldModel):
    """``{x in R^d : x_d >= 0}`` with optional constant drift."""

    drift: Optional[tuple] = None

    kind = "halfspace"
    has_boundary = True

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")
        if self.drift is not None:
            z = tuple(float(c) for c in self.drift)
            if len(z) != self.dim:
                raise ValueError("drift length must equal dim")
            object.__setattr__(self, "drift", z)

    def contains(self, p, tol=POINT_TOL):
        return np.asarray(p)[..., -1] >= -tol

    def origin(self):
        x = np.zeros(self.dim)
        x[-1] = 1.0
        return x

    def initial_frame(self, p):
        return _rotation_free_identity(self.dim, np.shape(p)[:-1])

    def boundary_gap(self, p):
        return np.maximum(np.asarray(p, dtype=float)[..., -1], 0.0)

    def _normal_unchecked(self, p):
        n = np.zeros(np.shape(p))
        n[..., -1] = 1.0
        return n

    def inward_normal(self, p):
        p = self.check_point(p)
        if np.any(self.boundary_gap(p) > self.boundary_tolerance()):
            raise PreconditionError("inward normal requested at an interior point")
        return self._normal_unchecked(p)

    def reflect(self, y):
        y = np.array(y, dtype=float, copy=True)
        dl = np.maximum(-y[..., -1], 0.0)
        y[..., -1] = np.maximum(y[..., -1], 0.0)
        return y, dl

    def geodesic_step(self, p, f, v):
        p = np.asarray(p, dtype=float)
        f = np.asarray(f, dtype=float)
        return p + np.einsum("...md,...d->...m", f, v), f.copy()

    def drift_in_frame(self, p, f):
        if self.drift is None:
            return None
        return np.einsum("...md,m->...d", f, np.asarray(self.drift))

    def describe(self):
        out = {"kind": self.kind, "dim": self.dim}
        if self.drift is not None:
            out["drift"] = list(self.drift)
        return out


@dataclass(frozen=True)
class HalfLine(HalfSpace):
    """``[0, inf)``; the one-dimensional half-space."""

    dim: int = 1

    kind = "halfline"

    def __post_init__(self):
        if self.dim != 1:
            raise ValueError("HalfLine is one-dimensional")
        super().__post_init__()


@dataclass(frozen=True)
class Ball(ManifoldModel):
    """Closed Euclidean ball of radius ``radius``; convex boundary with ``II = 1/R``."""

    radius: float = 1.0

    kind = "ball"
    has_boundary = True

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @property
    def scale(self):
        return float(self.radius)

    def contains(self, p, tol=POINT_TOL):
        return np.linalg.norm(p, axis=-1) <= self.radius * (1.0 + tol)

    def origin(self):
        return np.zeros(self.dim)

    def initial_frame(self, p):
        return _rotation_free_identity(self.dim, np.shape(p)[:-1])

    def curvature_bounds(self):
        # II vanishes on the normal; on the boundary tangent space it is 1/R
        s = 1.0 / self.radius if self.dim > 1 else 0.0
        return CurvatureBounds(K1=0.0, K2=0.0, sigma1=s, sigma2=s)

    def boundary_gap(self, p):
        return np.maximum(self.radius - np.linalg.norm(p, axis=-1), 0.0)

    def _normal_unchecked(self, p):
        p = np.asarray(p, dtype=float)
        r = np.linalg.norm(p, axis=-1, keepdims=True)
        return -p / np.where(r > 0, r, 1.0)

    def inward_normal(self, p):
        p = self.check_point(p)
        if np.any(self.boundary_gap(p) > self.boundary_tolerance()):
            raise PreconditionError("inward normal requested at an interior point")
        return self._normal_unchecked(p)

    def _sff(self, p, f):
        nf = self.normal_in_frame(p, f)
        eye = _rotation_free_identity(self.dim, np.shape(p)[:-1])
        return (eye - nf[..., :, None] * nf[..., None, :]) / self.radius

    def reflect(self, y):
        y = np.asarray(y, dtype=float)
        r = np.linalg.norm(y, axis=-1)
        out = r > self.radius
        dl = np.where(out, r - self.radius, 0.0)
        scale = np.where(out, self.radius / np.where(out, r, 1.0), 1.0)
        return y * scale[..., None], dl

    def geodesic_step(self, p, f, v):
        p = np.asarray(p, dtype=float)
        f = np.asarray(f, dtype=float)
        return p + np.einsum("...md,...d->...m", f, v), f.copy()

    def describe(self):
        return {"kind": self.kind, "dim": self.dim, "radius": self.radius}


# ---------------------------------------------------------------------------
# curved, boundaryless models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Sphere(ManifoldModel):
    """Unit sphere ``S^d`` in embedding coordinates; ``Ric = (d - 1) Id``."""

    kind = "sphere"

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")

    @property
    def ambient_dim(self):
        return self.dim + 1

    def ricci_constant(self):
        return float(self.dim - 1)

    def contains(self, p, tol=POINT_TOL):
        return np.abs(np.linalg.norm(p, axis=-1) - 1.0) <= tol

    def origin(self):
        x = np.zeros(self.dim + 1)
        x[-1] = 1.0
        return x

    def initial_frame(self, p):
        p = np.asarray(p, dtype=float)
        # Gram-Schmidt of the standard basis against p, keeping d columns
        shape = p.shape[:-1]
        m = self.dim + 1
        basis = np.broadcast_to(np.eye(m), shape + (m, m))
        flat_p = p.reshape(-1, m)
        flat_b = basis.reshape(-1, m, m)
        out = np.empty((flat_p.shape[0], m, self.dim))
        for i, (x, b) in enumerate(zip(flat_p, flat_b)):
            cols = [x]
            for e in b.T:
                w = e - sum(np.dot(e, c) * c for c in cols)
                nw = np.linalg.norm(w)
                if nw > 1e-6:
                    cols.append(w / nw)
                if len(cols) == m:
                    break
            out[i] = np.stack(cols[1:], axis=-1)
        return out.reshape(shape + (m, self.dim))

    def geodesic_step(self, p, f, v):
        p = np.asarray(p, dtype=float)
        f = np.asarray(f, dtype=float)
        w = np.einsum("...md,...d->...m", f, v)
        theta = np.linalg.norm(w, axis=-1)
        safe = np.where(theta > 0, theta, 1.0)
        u = w / safe[..., None]
        c, s = np.cos(theta), np.sin(theta)
        q = c[..., None] * p + s[..., None] * u
        q /= np.linalg.norm(q, axis=-1, keepdims=True)
        # components along u rotate in the (p, u) plane; the rest is untouched
        cu = np.einsum("...md,...m->...d", f, u)
        delta = (c - 1.0)[..., None] * u - s[..., None] * p
        g = f + delta[..., :, None] * cu[..., None, :]
        g -= q[..., :, None] * np.einsum("...m,...md->...d", q, g)[..., None, :]
        return q, g


@dataclass(frozen=True)
class HyperbolicPlane(ManifoldModel):
    """Hyperbolic plane (curvature -1) in the Poincare disk.

    Geodesics and parallel transport are computed exactly by passing through
    the hyperboloid model.
    """

    dim: int = 2

    kind = "hyperbolic"

    def __post_init__(self):
        if self.dim != 2:
            raise ValueError("HyperbolicPlane is two-dimensional")

    def ricci_constant(self):
        return -1.0

    def contains(self, p, tol=POINT_TOL):
        return np.linalg.norm(p, axis=-1) < 1.0

    def origin(self):
        return np.zeros(2)

    def metric_factor(self, p):
        p = np.asarray(p, dtype=float)
        return 2.0 / (1.0 - np.sum(p * p, axis=-1))

    def initial_frame(self, p):
        lam = self.metric_factor(p)
        return _rotation_free_identity(2, np.shape(p)[:-1]) / lam[..., None, None]

    @staticmethod
    def _to_hyperboloid(y, f):
        r2 = np.sum(y * y, axis=-1)
        s = 1.0 - r2
        x0 = (1.0 + r2) / s
        xs = 2.0 * y / s[..., None]
        yc = np.einsum("...m,...md->...d", y, f)
        d0 = 4.0 * yc / (s * s)[..., None]
        ds = 2.0 * f / s[..., None, None] + 4.0 * y[..., :, None] * yc[..., None, :] / (s * s)[..., None, None]
        X = np.concatenate([x0[..., None], xs], axis=-1)
        F = np.concatenate([d0[..., None, :], ds], axis=-2)
        return X, F

    @staticmethod
    def _to_disk(X, F):
        den = 1.0 + X[..., 0]
        y = X[..., 1:] / den[..., None]
        f = F[..., 1:, :] / den[..., None, None] - X[..., 1:, None] * F[..., 0:1, :] / (den * den)[..., None, None]
        return y, f

    @staticmethod
    def _mink(a, b):
        return -a[..., 0] * b[..., 0] + np.sum(a[..., 1:] * b[..., 1:], axis=-1)

    def geodesic_step(self, p, f, v):
        p = np.asarray(p, dtype=float)
        f = np.asarray(f, dtype=float)
        X, F = self._to_hyperboloid(p, f)
        w = np.einsum("...md,...d->...m", F, v)
        theta = np.sqrt(np.maximum(self._mink(w, w), 0.0))
        safe = np.where(theta > 0, theta, 1.0)
        u = w / safe[..., None]
        ch, sh = np.cosh(theta), np.sinh(theta)
        Xn = ch[..., None] * X + sh[..., None] * u
        cu = -u[..., 0:1] * F[..., 0, :] + np.einsum("...m,...md->...d", u[..., 1:], F[..., 1:, :])
        delta = (ch - 1.0)[..., None] * u + sh[..., None] * X
        Fn = F + delta[..., :, None] * cu[..., None, :]
        return self._to_disk(Xn, Fn)


_MODELS = {
    "halfline": HalfLine,
    "halfspace": HalfSpace,
    "ball": Ball,
    "sphere": Sphere,
    "hyperbolic": HyperbolicPlane,
    "hyperbolicplane": HyperbolicPlane,
}


def make_model(spec: dict) -> ManifoldModel:
    """Build a model from a config mapping (``kind``, ``dim``, ``radius``, ``drift``)."""
    spec = dict(spec)
    kind = str(spec.pop("kind", "")).lower().replace("_", "").replace("-", "")
    if kind not in _MODELS:
        raise ValueError(f"unknown model kind {kind!r}; available: {sorted(set(_MODELS))}")
    cls = _MODELS[kind]
    kwargs = {}
    if "dim" in spec:
        kwargs["dim"] = int(spec.pop("dim"))
    if "radius" in spec:
        kwargs["radius"] = float(spec.pop("radius"))
    if "drift" in spec:
        drift = spec.pop("drift")
        if drift is not None:
            kwargs["drift"] = tuple(float(z) for z in drift)
    if spec:
        raise ValueError(f"unexpected model keys: {sorted(spec)}")
    if cls in (Ball, HalfSpace, Sphere) and "dim" not in kwargs:
        raise ValueError(f"{kind} needs 'dim'")
    return cls(**kwargs)


# module-level aliases for the functional interface
def ric_z(model: ManifoldModel, p) -> np.ndarray:
    return model.ric_z(p)


def second_fundamental_form(model: ManifoldModel, p, f) -> np.ndarray:
    return model.second_fundamental_form(p, f)


def geodesic_step(model: ManifoldModel, p, f, v):
    return model.geodesic_step(p, f, v)


def boundary_gap(model: ManifoldModel, p) -> np.ndarray:
    return model.boundary_gap(model.check_point(p))


def inward_normal(model: ManifoldModel, p) -> np.ndarray:
    return model.inward_normal(p)
