"""
Euler simulation of the reflecting diffusion and its horizontal frame process.

A step moves along the geodesic with increment ``dW + u^{-1} Z dt`` in frame
coordinates, then maps the tentative point back into the domain:

* half-line / half-space: grid-level Skorokhod map on the normal coordinate,
  the local-time increment is the deficit ``(-y_d)^+``;
* ball: projection onto the sphere of radius ``R``, increment ``|y| - R``.

Index conventions (``n`` steps, ``t_k = k dt``):

``points[k]``, ``frames[k]``, ``on_boundary[k]``
    state at ``t_k``, ``k = 0..n``.
``dW[k]``
    Brownian increment over ``[t_k, t_{k+1}]``, ``k = 0..n-1``.
``dl[k]``
    local time accrued on the step that ends at ``t_k`` (``dl[0] = 0``), so
    ``dl[k] > 0`` only if the point ``k`` was placed on the boundary.
``local_time[k]``
    cumulative ``l_{t_k}``.

Gaussian increments for path ``j`` come from a Philox generator keyed by
``(base_seed, j)``; results do not depend on chunking or worker count.
"""
from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from .errors import DomainError
from .geometry import ManifoldModel

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class PathGrid:
    T: float
    n_steps: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")
        if int(self.n_steps) < 1:
            raise ValueError("n_steps must be a positive integer")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def index_of(self, t: float) -> int:
        """Nearest grid index to time ``t``."""
        return int(round(t / self.dt))


@dataclass(frozen=True)
class SamplerConfig:
    grid: PathGrid
    n_paths: int = 1000
    base_seed: int = 0
    boundary_tolerance: Optional[float] = None
    chunk_size: int = 4096
    workers: int = 1

    def __post_init__(self):
        if int(self.n_paths) < 1:
            raise ValueError("n_paths must be >= 1")
        if int(self.chunk_size) < 1:
            raise ValueError("chunk_size must be >= 1")
        object.__setattr__(self, "base_seed", int(self.base_seed) & _MASK64)

    def tolerance_for(self, model: ManifoldModel) -> float:
        if self.boundary_tolerance is not None:
            return float(self.boundary_tolerance)
        return model.boundary_tolerance()


@dataclass
class PathBatch:
    """A block of simulated paths; every array carries a leading path axis."""

    model: ManifoldModel
    grid: PathGrid
    points: np.ndarray        # (P, n+1, m)
    frames: np.ndarray        # (P, n+1, m, d)
    dW: np.ndarray            # (P, n, d)
    dl: np.ndarray            # (P, n+1)
    on_boundary: np.ndarray   # (P, n+1) bool
    path_ids: np.ndarray      # (P,)
    base_seed: int = 0

    @property
    def n_paths(self) -> int:
        return self.points.shape[0]

    @property
    def local_time(self) -> np.ndarray:
        return np.cumsum(self.dl, axis=1)

    def path(self, i: int) -> "PathSample":
        return PathSample(
            model=self.model, grid=self.grid,
            points=self.points[i], frames=self.frames[i], dW=self.dW[i],
            dl=self.dl[i], on_boundary=self.on_boundary[i],
            path_id=int(self.path_ids[i]), seed=self.base_seed,
        )


@dataclass
class PathSample:
    """One discretised trajectory (see module docstring for index conventions)."""

    model: ManifoldModel
    grid: PathGrid
    points: np.ndarray
    frames: np.ndarray
    dW: np.ndarray
    dl: np.ndarray
    on_boundary: np.ndarray
    path_id: int = 0
    seed: int = 0

    @property
    def local_time(self) -> np.ndarray:
        return np.cumsum(self.dl)

    def as_batch(self) -> PathBatch:
        return PathBatch(
            model=self.model, grid=self.grid,
            points=self.points[None], frames=self.frames[None], dW=self.dW[None],
            dl=self.dl[None], on_boundary=self.on_boundary[None],
            path_ids=np.array([self.path_id]), base_seed=self.seed,
        )


def as_batch(paths) -> PathBatch:
    return paths.as_batch() if isinstance(paths, PathSample) else paths


def path_generator(base_seed: int, path_index: int) -> np.random.Generator:
    """Counter-based stream for one path, keyed by ``(base_seed, path_index)``."""
    key = np.array([int(base_seed) & _MASK64, int(path_index) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def brownian_increments(model: ManifoldModel, grid: PathGrid, base_seed: int,
                        path_ids: Sequence[int]) -> np.ndarray:
    out = np.empty((len(path_ids), grid.n_steps, model.dim))
    sd = np.sqrt(grid.dt)
    for row, j in enumerate(path_ids):
        out[row] = path_generator(base_seed, j).standard_normal((grid.n_steps, model.dim)) * sd
    return out


def simulate_increments(model: ManifoldModel, x, grid: PathGrid, dW: np.ndarray,
                        boundary_tolerance: Optional[float] = None,
                        frame0: Optional[np.ndarray] = None,
                        path_ids=None, base_seed: int = 0) -> PathBatch:
    """Run the scheme on given increments ``dW`` of shape ``(P, n, d)``."""
    x = model.check_point(x)
    dW = np.asarray(dW, dtype=float)
    if dW.ndim == 2:
        dW = dW[None]
    P, n, d = dW.shape
    if n != grid.n_steps or d != model.dim:
        raise ValueError(f"dW has shape {dW.shape}, expected (P, {grid.n_steps}, {model.dim})")
    tol = model.boundary_tolerance() if boundary_tolerance is None else boundary_tolerance
    m = model.ambient_dim

    points = np.empty((P, n + 1, m))
    frames = np.empty((P, n + 1, m, d))
    dl = np.zeros((P, n + 1))
    on_bd = np.zeros((P, n + 1), dtype=bool)

    p = np.broadcast_to(x, (P, m)).copy()
    f = model.initial_frame(x) if frame0 is None else np.asarray(frame0, dtype=float)
    f = np.broadcast_to(f, (P, m, d)).copy()
    points[:, 0] = p
    frames[:, 0] = f
    on_bd[:, 0] = model.boundary_gap(p) <= tol

    dt = grid.dt
    for k in range(n):
        v = dW[:, k]
        z = model.drift_in_frame(p, f)
        if z is not None:
            v = v + z * dt
        y, f = model.geodesic_step(p, f, v)
        p, inc = model.reflect(y)
        points[:, k + 1] = p
        frames[:, k + 1] = f
        dl[:, k + 1] = inc
        on_bd[:, k + 1] = model.boundary_gap(p) <= tol

    if path_ids is None:
        path_ids = np.arange(P)
    return PathBatch(model=model, grid=grid, points=points, frames=frames, dW=dW,
                     dl=dl, on_boundary=on_bd, path_ids=np.asarray(path_ids),
                     base_seed=base_seed)


def simulate_batch(model: ManifoldModel, x, cfg: SamplerConfig, path_ids) -> PathBatch:
    path_ids = np.asarray(path_ids, dtype=np.int64)
    dW = brownian_increments(model, cfg.grid, cfg.base_seed, path_ids)
    return simulate_increments(model, x, cfg.grid, dW, cfg.tolerance_for(model),
                               path_ids=path_ids, base_seed=cfg.base_seed)


def simulate_path(model: ManifoldModel, x, cfg: SamplerConfig, path_index: int,
                  dW: Optional[np.ndarray] = None) -> PathSample:
    """One Euler path; pass ``dW`` of shape ``(n, d)`` to inject the noise."""
    x = model.check_point(x)
    if dW is None:
        batch = simulate_batch(model, x, cfg, [path_index])
    else:
        batch = simulate_increments(model, x, cfg.grid, np.asarray(dW)[None],
                                    cfg.tolerance_for(model), path_ids=[path_index],
                                    base_seed=cfg.base_seed)
    return batch.path(0)


def _chunks(cfg: SamplerConfig):
    for start in range(0, cfg.n_paths, cfg.chunk_size):
        yield np.arange(start, min(start + cfg.chunk_size, cfg.n_paths))


def simulate_ensemble(model: ManifoldModel, x, cfg: SamplerConfig) -> Iterator[PathBatch]:
    """Stream ``cfg.n_paths`` paths in chunks of ``cfg.chunk_size``."""
    x = model.check_point(x)
    for ids in _chunks(cfg):
        yield simulate_batch(model, x, cfg, ids)


def _apply_chunk(args):
    func, model, x, cfg, ids = args
    return func(simulate_batch(model, x, cfg, ids))


def map_ensemble(func: Callable[[PathBatch], object], model: ManifoldModel, x,
                 cfg: SamplerConfig) -> list:
    """Apply ``func`` to every chunk, possibly in a process pool.

    Results come back in chunk order whatever the scheduling, so reductions
    over them are reproducible.  ``func`` must be picklable when
    ``cfg.workers > 1``.
    """
    x = model.check_point(x)
    tasks = [(func, model, x, cfg, ids) for ids in _chunks(cfg)]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(_apply_chunk, tasks))
    return [_apply_chunk(t) for t in tasks]


def dump_paths_csv(batch: PathBatch, path) -> None:
    """Write ``(path_id, k, t, x_1..x_m, dl, on_boundary)`` rows."""
    m = batch.points.shape[-1]
    times = batch.grid.times
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path_id", "k", "t"] + [f"x_{i + 1}" for i in range(m)] + ["dl", "on_boundary"])
        for i, pid in enumerate(batch.path_ids):
            for k, t in enumerate(times):
                w.writerow([int(pid), k, repr(float(t))]
                           + [repr(float(c)) for c in batch.points[i, k]]
                           + [repr(float(batch.dl[i, k])), int(batch.on_boundary[i, k])])
