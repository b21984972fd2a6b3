"""
Monte Carlo estimation of entropy, variance and path-space Dirichlet forms,
and verdicts for the log-Sobolev and Poincare bounds.

Estimation consumes the ensemble chunk by chunk; each chunk is reduced to
per-path scalars, which are concatenated in path order before any statistic
or bootstrap is computed.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy.special import xlogy

from . import constants
from .damped import CylinderPointwise, damped_gradient, malliavin_gradient
from .errors import ConfigurationError
from .geometry import CurvatureBounds, ManifoldModel
from .sampler import SamplerConfig, map_ensemble

SCHEMA_VERSION = 1
N_BOOTSTRAP = 200
SE_BAND = 3.0

HOLDS = "holds"
WITHIN = "holds-within-error"
VIOLATED = "violated"
_SEVERITY = {HOLDS: 0, WITHIN: 1, VIOLATED: 2}


@dataclass(frozen=True)
class EstimateWithError:
    value: float
    std_error: float
    n_samples: int

    def scaled(self, c: float) -> "EstimateWithError":
        return EstimateWithError(c * self.value, abs(c) * self.std_error, self.n_samples)

    def as_dict(self):
        return {"value": self.value, "std_error": self.std_error, "n_samples": self.n_samples}


def bootstrap_generator(seed: int, tag: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), 0xB007, int(tag)]))


def _bootstrap_se(stat, x: np.ndarray, rng: np.random.Generator, n_boot: int = N_BOOTSTRAP) -> float:
    n = x.shape[0]
    reps = np.empty(n_boot)
    for b in range(n_boot):
        reps[b] = stat(x[rng.integers(0, n, n)])
    return float(np.std(reps, ddof=1))


def _entropy(f2: np.ndarray) -> float:
    m = f2.mean()
    return float(np.mean(xlogy(f2, f2)) - xlogy(m, m))


def estimate_entropy(values, seed: int = 0, n_boot: int = N_BOOTSTRAP) -> EstimateWithError:
    """Plug-in ``E[F^2 log F^2] - E[F^2] log E[F^2]`` with a bootstrap error."""
    f = np.asarray(values, dtype=float).ravel()
    if f.size < 2:
        raise ValueError("need at least two samples")
    f2 = f * f
    if np.all(f2 == f2[0]):
        return EstimateWithError(0.0, 0.0, f.size)
    rng = bootstrap_generator(seed, 1)
    return EstimateWithError(_entropy(f2), _bootstrap_se(_entropy, f2, rng, n_boot), f.size)


def estimate_variance(values, seed: int = 0, n_boot: int = N_BOOTSTRAP) -> EstimateWithError:
    """Unbiased sample variance with a bootstrap error."""
    f = np.asarray(values, dtype=float).ravel()
    if f.size < 2:
        raise ValueError("need at least two samples")
    if np.all(f == f[0]):
        return EstimateWithError(0.0, 0.0, f.size)
    var = lambda x: float(np.var(x, ddof=1))
    rng = bootstrap_generator(seed, 2)
    return EstimateWithError(var(f), _bootstrap_se(var, f, rng, n_boot), f.size)


def estimate_mean(values) -> EstimateWithError:
    x = np.asarray(values, dtype=float).ravel()
    if x.size < 2:
        raise ValueError("need at least two samples")
    return EstimateWithError(float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.size)), x.size)


def verdict(lhs: EstimateWithError, rhs: EstimateWithError, band: float = SE_BAND) -> str:
    se = float(np.hypot(lhs.std_error, rhs.std_error))
    margin = rhs.value - lhs.value
    if lhs.value - band * se > rhs.value:
        return VIOLATED
    if abs(margin) < band * se:
        return WITHIN
    return HOLDS


def worst(verdicts) -> str:
    return max(verdicts, key=_SEVERITY.__getitem__, default=HOLDS)


@dataclass
class BoundCheck:
    """A secondary comparison of the same left side against another constant."""

    name: str
    rhs: EstimateWithError
    verdict: str
    binding: bool = True

    def as_dict(self):
        return {"name": self.name, "rhs": self.rhs.as_dict(), "verdict": self.verdict,
                "binding": self.binding}


@dataclass
class InequalityReport:
    kind: str
    lhs: EstimateWithError
    rhs: EstimateWithError
    margin: float
    verdict: str
    metadata: dict
    chain: Dict[str, EstimateWithError] = field(default_factory=dict)
    checks: List[BoundCheck] = field(default_factory=list)

    @classmethod
    def build(cls, kind, lhs, rhs, metadata, chain=None, checks=None):
        return cls(kind=kind, lhs=lhs, rhs=rhs, margin=rhs.value - lhs.value,
                   verdict=verdict(lhs, rhs), metadata=metadata,
                   chain=dict(chain or {}), checks=list(checks or []))

    @property
    def overall_verdict(self) -> str:
        return worst([self.verdict] + [c.verdict for c in self.checks if c.binding])

    def as_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "lhs": self.lhs.as_dict(),
            "rhs": self.rhs.as_dict(),
            "margin": self.margin,
            "verdict": self.verdict,
            "overall_verdict": self.overall_verdict,
            "chain": {k: v.as_dict() for k, v in self.chain.items()},
            "checks": [c.as_dict() for c in self.checks],
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=2) + "\n"

    CSV_COLUMNS = ["kind", "model", "function", "T", "n_steps", "n_paths", "base_seed",
                   "factor2", "lhs", "lhs_se", "rhs", "rhs_se", "margin", "verdict",
                   "overall_verdict"]

    def csv_row(self) -> dict:
        md = self.metadata
        return {
            "kind": self.kind, "model": md.get("model", {}).get("kind", ""),
            "function": md.get("function", {}).get("name", ""),
            "T": md.get("T"), "n_steps": md.get("n_steps"), "n_paths": md.get("n_paths"),
            "base_seed": md.get("base_seed"), "factor2": md.get("factor2"),
            "lhs": self.lhs.value, "lhs_se": self.lhs.std_error,
            "rhs": self.rhs.value, "rhs_se": self.rhs.std_error,
            "margin": self.margin, "verdict": self.verdict,
            "overall_verdict": self.overall_verdict,
        }


# ---------------------------------------------------------------------------
# per-path reductions
# ---------------------------------------------------------------------------

def check_bounds(model: ManifoldModel, bounds: CurvatureBounds) -> None:
    exact = model.curvature_bounds()
    ok = bounds.K2 <= exact.K2 and exact.K1 <= bounds.K1
    if model.has_boundary and model.dim > 1:
        ok = ok and bounds.sigma2 <= exact.sigma2 and exact.sigma1 <= bounds.sigma1
    if not ok:
        raise ConfigurationError(
            f"bounds {bounds.as_dict()} do not contain the exact constants "
            f"{exact.as_dict()} of {model.kind}")


@dataclass
class PointwiseForms:
    """Per-path reduction used by the log-Sobolev and Poincare verifiers."""

    F: CylinderPointwise
    bounds: CurvatureBounds
    projection: str = "every"
    with_damped: bool = True

    def __call__(self, batch) -> Dict[str, np.ndarray]:
        dt = batch.grid.dt
        D2 = malliavin_gradient(batch, self.F).norms_sq()
        ab = constants.compute_A_B(batch, self.bounds)
        out = {
            "F": self.F.evaluate(batch),
            "plain": D2[:, :-1].sum(axis=1) * dt,
            "form": (D2[:, :-1] * ab.A[:, :-1]).sum(axis=1) * dt + (D2 * ab.B * batch.dl).sum(axis=1),
            "dl_form": (D2 * batch.dl).sum(axis=1),
            "l_T": batch.dl.sum(axis=1),
        }
        if self.with_damped:
            Dt2 = damped_gradient(batch, self.F, self.projection).norms_sq()
            out["damped"] = Dt2[:, :-1].sum(axis=1) * dt
        return out


def collect(func, model, x, cfg: SamplerConfig) -> Dict[str, np.ndarray]:
    parts = map_ensemble(func, model, x, cfg)
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}


def estimate_dirichlet_ou(model, x, F, bounds, cfg: SamplerConfig) -> EstimateWithError:
    """MC mean of ``sum_k |D_k F|^2 (A_k dt + B_k dl_k)``."""
    data = collect(PointwiseForms(F, bounds, with_damped=False), model, x, cfg)
    return estimate_mean(data["form"])


def estimate_damped_dirichlet(model, x, F, cfg: SamplerConfig,
                              projection: str = "every") -> EstimateWithError:
    """MC mean of ``2 sum_k |D~_k F|^2 dt``."""
    data = collect(PointwiseForms(F, CurvatureBounds(), projection), model, x, cfg)
    return estimate_mean(2.0 * data["damped"])


def _metadata(kind, model, x, F, bounds, cfg, **extra):
    md = {
        "scenario": kind,
        "model": model.describe(),
        "x": [float(c) for c in np.asarray(x, dtype=float)],
        "function": {"name": getattr(F, "name", "F"),
                     "times": list(getattr(F, "times", []))},
        "bounds": bounds.as_dict() if bounds is not None else None,
        "T": cfg.grid.T, "n_steps": cfg.grid.n_steps,
        "n_paths": cfg.n_paths, "base_seed": cfg.base_seed,
    }
    md.update(extra)
    return md


def verify_lsi(model: ManifoldModel, x, F: CylinderPointwise, bounds: CurvatureBounds,
               cfg: SamplerConfig, factor2: bool = True, projection: str = "every",
               rhs_scale: float = 1.0) -> InequalityReport:
    """Entropy of ``F^2`` against the weighted Dirichlet form.

    The right side is ``(2 if factor2 else 1) * E sum |D F|^2 (A dt + B dl)``;
    ``rhs_scale`` multiplies every right side (used by the harness self-test).
    The chain ``Ent <= 2 E int |D~F|^2 <= 2 E(form)`` is reported link by link.
    """
    check_bounds(model, bounds)
    data = collect(PointwiseForms(F, bounds, projection), model, x, cfg)
    c = (2.0 if factor2 else 1.0) * rhs_scale
    lhs = estimate_entropy(data["F"], seed=cfg.base_seed)
    form = estimate_mean(data["form"])
    plain = estimate_mean(data["plain"])
    damped2 = estimate_mean(2.0 * data["damped"])
    rhs = form.scaled(c)

    chain = {
        "dirichlet_form": form,
        "plain_form": plain,
        "damped_form_x2": damped2,
        "form_minus_damped": estimate_mean(data["form"] - data["damped"]),
    }
    checks = [
        BoundCheck("damped_lsi", damped2.scaled(rhs_scale), verdict(lhs, damped2.scaled(rhs_scale))),
        BoundCheck("damped_le_form",
                   EstimateWithError(0.0, 0.0, form.n_samples),
                   verdict(estimate_mean(data["damped"] - data["form"]),
                           EstimateWithError(0.0, 0.0, form.n_samples))),
    ]
    if not model.has_boundary:
        sl = constants.sup_lambda(cfg.grid.T, bounds.K1, bounds.K2)
        est = plain.scaled(c * sl.value)
        checks.append(BoundCheck(f"lambda_sup[{sl.method}]", est, verdict(lhs, est)))
    if bounds.K1 == bounds.K2 == 0 and bounds.sigma1 == bounds.sigma2 == 0:
        est = plain.scaled(c)
        checks.append(BoundCheck("flat_plain_form", est, verdict(lhs, est)))
    if model.has_boundary and bounds.K1 == bounds.K2 == 0 and bounds.sigma2 >= 0:
        s1 = bounds.sigma1
        per_path = (1 + s1 * data["l_T"]) * data["plain"] + s1 * (1 + s1 * data["l_T"]) * cfg.grid.T * data["dl_form"]
        est = estimate_mean(per_path).scaled(c)
        checks.append(BoundCheck("ricci_flat_convex", est, verdict(lhs, est)))

    md = _metadata("lsi", model, x, F, bounds, cfg, factor2=bool(factor2),
                   projection=projection, rhs_scale=rhs_scale)
    return InequalityReport.build("lsi", lhs, rhs, md, chain, checks)


def verify_poincare(model: ManifoldModel, x, F: CylinderPointwise, bounds: CurvatureBounds,
                    cfg: SamplerConfig, rhs_scale: float = 1.0) -> InequalityReport:
    """``Var(F)`` against ``spectral_bound * E int |D F|^2 dt``."""
    check_bounds(model, bounds)
    if model.has_boundary and (bounds.sigma1 != 0 or bounds.sigma2 != 0 or bounds.K1 != 0 or bounds.K2 != 0):
        raise ConfigurationError("the spectral-gap bound applies to boundaryless models "
                                 "or to flat boundaries with all bounds zero")
    data = collect(PointwiseForms(F, bounds, with_damped=False), model, x, cfg)
    T = cfg.grid.T
    bound = constants.spectral_gap_bound(T, bounds.K1, bounds.K2)
    lhs = estimate_variance(data["F"], seed=cfg.base_seed)
    plain = estimate_mean(data["plain"])
    rhs = plain.scaled(bound * rhs_scale)
    md = _metadata("poincare", model, x, F, bounds, cfg, spectral_bound=bound,
                   bound_method="grid" if bounds.K2 == 0 else "closed-form",
                   rhs_scale=rhs_scale)
    return InequalityReport.build("poincare", lhs, rhs, md, {"plain_form": plain})
