"""
Named cylinder functions with hand-coded gradients.

Pointwise functions act on ``(P, N, m)`` arrays of chart points taken at the
cylinder times; integral functions are built from an outer ``f`` on ``R^m``
and inner ``g_j(s, x)``.  Everything here is a small picklable class so that
ensembles can be evaluated in worker processes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .damped import CylinderPointwise
from .errors import ConfigurationError


# ---------------------------------------------------------------------------
# pointwise cylinder functions
# ---------------------------------------------------------------------------

@dataclass
class TanhOfLinear:
    """``tanh(offset + sum_i c_i <a, x_i>)``."""

    weights: Sequence[float]
    direction: Sequence[float]
    scale: float = 1.0
    offset: float = 0.0

    def _arg(self, pts):
        a = np.asarray(self.direction, dtype=float)
        c = np.asarray(self.weights, dtype=float)
        return self.offset + self.scale * np.einsum("pnm,m,n->p", pts, a, c)

    def value(self, pts):
        return np.tanh(self._arg(pts))

    def gradient(self, pts):
        sech2 = 1.0 - np.tanh(self._arg(pts)) ** 2
        a = np.asarray(self.direction, dtype=float)
        c = np.asarray(self.weights, dtype=float)
        return self.scale * sech2[:, None, None] * c[None, :, None] * a[None, None, :]


@dataclass
class LinearCoordinate:
    """``sum_i c_i <a, x_i>``; bounded on compact charts (ball, sphere, disk)."""

    weights: Sequence[float]
    direction: Sequence[float]

    def value(self, pts):
        return np.einsum("pnm,m,n->p", pts, np.asarray(self.direction, float),
                         np.asarray(self.weights, float))

    def gradient(self, pts):
        a = np.asarray(self.direction, dtype=float)
        c = np.asarray(self.weights, dtype=float)
        return np.broadcast_to(c[None, :, None] * a[None, None, :], pts.shape).copy()


@dataclass
class ExpNegCoordinate:
    """``exp(-<a, x_1>)``; single time, bounded on the half-space."""

    direction: Sequence[float]

    def value(self, pts):
        return np.exp(-pts[:, 0] @ np.asarray(self.direction, float))

    def gradient(self, pts):
        a = np.asarray(self.direction, dtype=float)
        out = np.zeros_like(pts)
        out[:, 0] = -self.value(pts)[:, None] * a
        return out


@dataclass
class Constant:
    c: float = 1.0

    def value(self, pts):
        return np.full(pts.shape[0], float(self.c))

    def gradient(self, pts):
        return np.zeros_like(pts)


def _unit(m, coord):
    a = np.zeros(m)
    a[coord] = 1.0
    return a


def pointwise(name: str, times: Sequence[float], ambient_dim: int, **params) -> CylinderPointwise:
    """Build a registered pointwise cylinder function.

    ``tanh``          tanh(scale * sum_i w_i x_i[coord] + offset)
    ``linear``        sum_i w_i x_i[coord]
    ``exp_neg``       exp(-x_1[coord])
    ``constant``      c
    """
    times = list(times)
    n = len(times)
    coord = int(params.pop("coord", 0))
    if not 0 <= coord < ambient_dim:
        raise ConfigurationError(f"coord {coord} out of range for {ambient_dim} coordinates")
    weights = params.pop("weights", [1.0] * n)
    if len(weights) != n:
        raise ConfigurationError("need one weight per cylinder time")
    direction = _unit(ambient_dim, coord)
    if name == "tanh":
        scale = float(params.pop("scale", 1.0))
        impl = TanhOfLinear(weights, direction, scale, float(params.pop("offset", 0.0)))
        lip = abs(scale) * float(np.sum(np.abs(weights)))
    elif name == "linear":
        impl = LinearCoordinate(weights, direction)
        lip = float(np.sum(np.abs(weights)))
    elif name == "exp_neg":
        if n != 1:
            raise ConfigurationError("exp_neg takes a single time")
        impl = ExpNegCoordinate(direction)
        lip = 1.0
    elif name == "constant":
        impl = Constant(float(params.pop("c", 1.0)))
        lip = 0.0
    else:
        raise ConfigurationError(f"unknown pointwise function {name!r}; "
                                 f"available: {sorted(POINTWISE_NAMES)}")
    if params:
        raise ConfigurationError(f"unexpected parameters for {name!r}: {sorted(params)}")
    return CylinderPointwise(times=times, value=impl.value, gradient=impl.gradient,
                             lipschitz=lip, name=name)


POINTWISE_NAMES = ("tanh", "linear", "exp_neg", "constant")


# ---------------------------------------------------------------------------
# integral cylinder functions
# ---------------------------------------------------------------------------

@dataclass
class CoordinateIntegrand:
    """``g(s, x) = weight(s) * x[coord]`` with ``weight(s) = a + b s``."""

    coord: int
    a: float = 1.0
    b: float = 0.0

    def value(self, s, x):
        return (self.a + self.b * s) * x[..., self.coord]

    def gradient(self, s, x):
        out = np.zeros_like(x)
        out[..., self.coord] = self.a + self.b * np.broadcast_to(s, x.shape[:-1])
        return out


@dataclass
class TimeOnlyIntegrand:
    """``g(s, x) = a + b s``; independent of the path."""

    a: float = 1.0
    b: float = 0.0

    def value(self, s, x):
        return np.broadcast_to(self.a + self.b * s, x.shape[:-1]).astype(float)

    def gradient(self, s, x):
        return np.zeros_like(x)


@dataclass
class TanhOuter:
    scale: float = 1.0

    def value(self, y):
        return np.tanh(self.scale * y[..., 0])

    def gradient(self, y):
        out = np.zeros_like(y)
        out[..., 0] = self.scale * (1.0 - np.tanh(self.scale * y[..., 0]) ** 2)
        return out


@dataclass
class IdentityOuter:
    def value(self, y):
        return y[..., 0]

    def gradient(self, y):
        out = np.zeros_like(y)
        out[..., 0] = 1.0
        return out


@dataclass
class LinearOuter:
    """``sum_j c_j y_j``."""

    coeffs: Sequence[float] = field(default_factory=lambda: [1.0])

    def value(self, y):
        return y @ np.asarray(self.coeffs, dtype=float)

    def gradient(self, y):
        return np.broadcast_to(np.asarray(self.coeffs, dtype=float), y.shape).copy()


INTEGRAL_NAMES = ("tanh_integral", "integral", "time_integral")


def integral(name: str, ambient_dim: int, **params):
    """Build a registered integral cylinder function.

    ``tanh_integral``  tanh(scale * int_0^T x_s[coord] ds)
    ``integral``       int_0^T x_s[coord] ds
    ``time_integral``  int_0^T (a + b s) ds   (path independent)
    """
    from .heat import CylinderIntegral

    coord = int(params.pop("coord", 0))
    if not 0 <= coord < ambient_dim:
        raise ConfigurationError(f"coord {coord} out of range for {ambient_dim} coordinates")
    if name == "tanh_integral":
        outer = TanhOuter(float(params.pop("scale", 1.0)))
        inner = [CoordinateIntegrand(coord)]
    elif name == "integral":
        outer = IdentityOuter()
        inner = [CoordinateIntegrand(coord)]
    elif name == "time_integral":
        outer = IdentityOuter()
        inner = [TimeOnlyIntegrand(float(params.pop("a", 1.0)), float(params.pop("b", 0.0)))]
    else:
        raise ConfigurationError(f"unknown integral function {name!r}; available: {sorted(INTEGRAL_NAMES)}")
    if params:
        raise ConfigurationError(f"unexpected parameters for {name!r}: {sorted(params)}")
    return CylinderIntegral(f=outer.value, f_grad=outer.gradient,
                            g=[h.value for h in inner], g_grad=[h.gradient for h in inner],
                            name=name)
