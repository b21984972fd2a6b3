"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""
import contextlib
import json
import time

import numpy as np
import pytest
import yaml
from scipy.integrate import quad
from scipy.stats import norm

from pathlsi import cli, constants as C, functions
from pathlsi.damped import check_identity_2_4, damped_gradient, malliavin_gradient, q_evolve, q_norm_ratio
from pathlsi.geometry import Ball, CurvatureBounds, HalfLine, HalfSpace, HyperbolicPlane, Sphere
from pathlsi.heat import verify_heat_lsi
from pathlsi.inequality import HOLDS, VIOLATED, WITHIN, estimate_mean, verify_lsi
from pathlsi.sampler import (PathGrid, SamplerConfig, brownian_increments, map_ensemble,
                             simulate_batch, simulate_increments)

import conftest
from fd import noise_derivative

OK_VERDICTS = (HOLDS, WITHIN)


@contextlib.contextmanager
def criterion(number, title, limit):
    start = time.perf_counter()
    status, detail = "FAIL", ""
    try:
        yield
        status = "PASS"
    except AssertionError as exc:
        detail = f" ({str(exc).splitlines()[0][:120]})"
        raise
    finally:
        elapsed = time.perf_counter() - start
        if status == "PASS" and elapsed > limit:
            status, detail = "FAIL", f" (runtime over {limit:g} s)"
        line = f"criterion {number}: {status}  {title}  [{elapsed:.1f} s / {limit:g} s]{detail}"
        conftest.ACCEPTANCE_LINES.append(line)
        print(line)
    assert elapsed <= limit, f"runtime {elapsed:.1f} s exceeds {limit:g} s"


def random_bounds(n, seed, kmin=1e-3):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        a, b = rng.uniform(-3, 3, 2)
        K1, K2 = max(a, b), min(a, b)
        T = rng.uniform(0, 5)
        if abs(K2) >= kmin and T > 0:
            out.append((K1, K2, T))
    return out


# ---------------------------------------------------------------------------

def test_criterion_1_closed_form_identity():
    with criterion(1, "Lambda(T,T) = 1/2 + Lambda(0,T)^2/2 on 1e3 draws, rel. tol 1e-12", 1.0):
        worst = 0.0
        for K1, K2, T in random_bounds(1000, 1):
            L0 = C.lambda_fn(0.0, T, K1, K2)
            LT = C.lambda_fn(T, T, K1, K2)
            worst = max(worst, abs(LT - (0.5 + 0.5 * L0 * L0)) / LT)
        assert worst <= 1e-12, f"worst relative deviation {worst:.3g}"


def test_criterion_2_maximizer_suite():
    with criterion(2, "sup Lambda vs 1e5-point grid <= 1e-8 on 1e3 draws; monotonicity", 30.0):
        worst = 0.0
        for K1, K2, T in random_bounds(1000, 2):
            s = C.sup_lambda(T, K1, K2)
            g = C.grid_sup_lambda(T, K1, K2)
            worst = max(worst, abs(s.value - g.value))
            if K2 < 0:
                assert s.t_star == T
            else:
                assert 0 < s.t_star < T
                assert abs(s.t_star - g.t_star) <= 2 * T / (C.GRID_POINTS - 1)
                # root of the stationarity equation
                b = C.beta(K1, K2)
                lhs = (1 + b / 2) * np.exp(-K2 * T) * np.exp(2 * K2 * s.t_star)
                assert lhs == pytest.approx(1 + b - b / 2 * np.exp(-K2 * T), rel=1e-10)
        assert worst <= 1e-8, f"worst gap {worst:.3g}"
        for K1, K2, T in random_bounds(50, 3):
            t = np.linspace(0, T, 10_001)
            lam = C.lambda_fn(t, T, K1, K2)
            if K2 < 0:
                assert np.all(np.diff(lam) > 0)
            else:
                k = int(np.argmax(lam))
                assert 0 < k < t.size - 1


def test_criterion_3_heat_constants():
    with criterion(3, "heat_A vs quadrature <= 1e-8; stationary residual <= 1e-10; K<0 monotone", 5.0):
        for K in (-2.0, -1.0, -0.3, 0.5, 1.0, 2.0):
            for T in (0.5, 1.0, 2.0):
                for s in np.linspace(0, T, 7):
                    phi = lambda u: quad(lambda v: np.exp(-K * (v - u)), u, T, epsabs=1e-14)[0]
                    ref = quad(lambda u: phi(u) * np.exp(-K * (s - u)), 0, s, epsabs=1e-14)[0]
                    assert abs(C.heat_A(s, T, K) - ref) <= 1e-8
                s0 = C.heat_stationary_point(T, K)
                if K > 0:
                    assert abs(np.exp(2 * K * s0) - (2 * np.exp(K * T) - 1)) <= 1e-10
                else:
                    grid = np.linspace(0, T, 10_001)
                    assert np.all(np.diff(C.heat_A(grid, T, K)) >= 0)


def test_criterion_4_q_functional():
    with criterion(4, "Q on sphere, Q-norm bound on 1e3 ball paths, identity residual order >= 0.9", 60.0):
        cfg = SamplerConfig(PathGrid(1.0, 1000), n_paths=20, base_seed=4)
        b = simulate_batch(Sphere(2), [0, 0, 1.0], cfg, np.arange(20))
        q = q_evolve(b)
        dev = np.linalg.norm(q.matrices - np.exp(-b.grid.times)[None, :, None, None] * np.eye(2),
                             ord=2, axis=(-2, -1)).max()
        assert dev <= 1e-2, f"sphere Q deviation {dev:.3g}"

        cfg = SamplerConfig(PathGrid(1.0, 200), n_paths=1000, base_seed=5)
        ball = Ball(2)
        parts = map_ensemble(_ball_ratio, ball, [0.0, 0.0], cfg)
        hits = np.concatenate([p[1] for p in parts])
        ratio = max(p[0] for p in parts)
        assert hits.mean() > 0.5, "boundary rarely reached"
        assert ratio <= 1 + 10 * cfg.grid.dt, f"Q-norm ratio {ratio:.6f}"

        F = functions.pointwise("tanh", [0.5, 1.0], 3, coord=0, weights=[1.0, 1.0])
        res = []
        for n in (250, 500, 1000, 2000):
            bb = simulate_batch(Sphere(2), [0, 0, 1.0], SamplerConfig(PathGrid(1.0, n), 20, base_seed=6),
                                np.arange(20))
            res.append(check_identity_2_4(bb, F))
        orders = np.log2(np.array(res[:-1]) / np.array(res[1:]))
        assert res[1] <= 1e-2 and orders.min() >= 0.9, f"orders {orders}"


def _ball_ratio(batch):
    bounds = batch.model.curvature_bounds()
    worst = max(q_norm_ratio(batch, bounds, base=s).max() for s in (0, 50, 100, 150))
    return worst, (batch.dl > 0).any(axis=1)


def test_criterion_5_sampler_oracle():
    with criterion(5, "half-line E l_T and E exp(-X_T) against exact values, 1e5 paths", 60.0):
        cfg = SamplerConfig(PathGrid(1.0, 512), n_paths=100_000, base_seed=7, chunk_size=8192)
        lt = np.concatenate(map_ensemble(_local_time, HalfLine(), [0.0], cfg))
        se = lt.std() / np.sqrt(lt.size)
        assert abs(lt.mean() - np.sqrt(2 / np.pi)) <= 3 * se + 0.05, f"E l_T = {lt.mean():.4f}"

        cfg = SamplerConfig(PathGrid(1.0, 512), n_paths=100_000, base_seed=8, chunk_size=8192)
        v = np.concatenate(map_ensemble(_exp_terminal, HalfLine(), [1.0], cfg))
        exact = quad(lambda y: np.exp(-y) * (norm.pdf(y - 1) + norm.pdf(y + 1)), 0, np.inf)[0]
        se = v.std() / np.sqrt(v.size)
        assert abs(v.mean() - exact) <= 3 * se + 0.02, f"E exp(-X_T) = {v.mean():.4f} vs {exact:.4f}"


def _local_time(batch):
    return batch.dl.sum(axis=1)


def _exp_terminal(batch):
    return np.exp(-batch.points[:, -1, 0])


LSI_SCENARIOS = [
    ("halfspace", HalfSpace(1), [1.0], CurvatureBounds(), ("tanh", [1.0], {})),
    ("sphere", Sphere(2), [0.0, 0.0, 1.0], CurvatureBounds(1.0, 1.0),
     ("linear", [0.5, 1.0], {"weights": [1.0, 1.0]})),
    ("hyperbolic", HyperbolicPlane(), [0.0, 0.0], CurvatureBounds(-1.0, -1.0),
     ("tanh", [0.5, 1.0], {"scale": 2.0, "weights": [1.0, 1.0]})),
    ("ball", Ball(2, 1.0), [0.0, 0.5], CurvatureBounds(0.0, 0.0, 1.0, 1.0),
     ("tanh", [1.0], {"scale": 2.0})),
]


def test_criterion_6_lsi_verification():
    with criterion(6, "log-Sobolev verdicts on four models at 1e5 paths; forced failure violated", 300.0):
        for name, model, x, bounds, (fname, times, params) in LSI_SCENARIOS:
            cfg = SamplerConfig(PathGrid(1.0, 100), n_paths=100_000, base_seed=hash(name) % 1000,
                                chunk_size=8192, workers=4)
            F = functions.pointwise(fname, times, model.ambient_dim, coord=0, **params)
            r = verify_lsi(model, x, F, bounds, cfg, factor2=True)
            print(f"  {name}: lhs {r.lhs.value:.5f} +- {r.lhs.std_error:.1e}, "
                  f"rhs {r.rhs.value:.5f}, verdict {r.verdict}, "
                  + ", ".join(f"{c.name}={c.verdict}" for c in r.checks))
            assert r.verdict in OK_VERDICTS, f"{name}: {r.verdict}"
            assert all(c.verdict in OK_VERDICTS for c in r.checks if c.binding), name
        cfg = SamplerConfig(PathGrid(1.0, 100), n_paths=20_000, base_seed=1)
        F = functions.pointwise("tanh", [1.0], 1)
        r = verify_lsi(HalfSpace(1), [1.0], F, CurvatureBounds(), cfg, rhs_scale=1e-3)
        assert r.verdict == VIOLATED


def test_criterion_7_heat_lsi():
    with criterion(7, "heat log-Sobolev: A-weighted and T^2 bounds hold; pathwise Holder step", 120.0):
        cfg = SamplerConfig(PathGrid(1.0, 200), n_paths=50_000, base_seed=9, chunk_size=8192, workers=4)
        F = functions.integral("tanh_integral", 1)
        r = verify_heat_lsi(HalfSpace(1), [1.0], F, 0.0, 0.0, cfg)
        prime = next(c for c in r.checks if c.name == "two_sup_A_constant")
        print(f"  lhs {r.lhs.value:.5f}, rhs {r.rhs.value:.5f} ({r.verdict}), "
              f"rhs' {prime.rhs.value:.5f} ({prime.verdict})")
        assert r.verdict == HOLDS and prime.verdict == HOLDS
        assert r.metadata["heat_lsi_constant"] == pytest.approx(1.0)
        assert r.metadata["holder_max_excess"] <= 1e-12


def test_criterion_8_gradient_finite_differences():
    with criterion(8, "bump-and-revalue check of both gradients on flat models, rel. err <= 1e-3", 30.0):
        P, n = 100, 80
        grid = PathGrid(1.0, n)
        rng = np.random.default_rng(10)
        F = functions.pointwise("tanh", [0.3, 0.6, 1.0], 2, coord=0, weights=[1.0, -0.7, 0.5])
        G = functions.pointwise("tanh", [0.5, 1.0], 2, coord=1, weights=[1.0, 1.0], scale=1.5)
        cases = [(HalfSpace(2), [0.3, 50.0], F, "malliavin"), (HalfSpace(2), [0.3, 50.0], F, "damped"),
                 (HalfSpace(2), [0.0, 0.1], G, "damped")]
        for model, x, H, flavor in cases:
            dW = brownian_increments(model, grid, 11, np.arange(P))
            b = simulate_increments(model, x, grid, dW)
            # boundary indices carry the right-continuous projector at t_k itself
            k = np.array([rng.choice(np.flatnonzero(~row[:-1])) for row in b.on_boundary])
            fd = noise_derivative(model, x, grid, dW, k, H.evaluate, eps=1e-7)
            g = (malliavin_gradient if flavor == "malliavin" else damped_gradient)(b, H).g[np.arange(P), k]
            scale = np.maximum(np.linalg.norm(g, axis=1), 1e-3)
            err = (np.linalg.norm(fd - g, axis=1) / scale).max()
            assert err <= 1e-3, f"{flavor}: {err:.3g}"


def test_criterion_9_determinism(tmp_path):
    with criterion(9, "identical config and seed give byte-identical JSON reports", 60.0):
        scenarios = [
            {"scenario": "lsi", "model": {"kind": "ball", "dim": 2}, "x": [0.0, 0.5],
             "bounds": "exact", "grid": {"T": 1.0, "n_steps": 100}, "n_paths": 5000,
             "function": {"name": "tanh", "times": [0.5, 1.0], "scale": 2.0}},
            {"scenario": "poincare", "model": {"kind": "sphere", "dim": 2},
             "grid": {"T": 1.0, "n_steps": 100}, "n_paths": 5000,
             "function": {"name": "linear", "times": [1.0]}},
            {"scenario": "heat-lsi", "model": {"kind": "halfspace", "dim": 1}, "x": [1.0],
             "grid": {"T": 1.0, "n_steps": 100}, "n_paths": 5000,
             "function": {"name": "tanh_integral"}},
        ]
        for i, cfg in enumerate(scenarios):
            path = tmp_path / f"c{i}.yaml"
            path.write_text(yaml.safe_dump(cfg))
            outs = []
            for rep, extra in enumerate((["--seed", "77"], ["--seed", "77"])):
                out = tmp_path / f"run{i}_{rep}"
                assert cli.main(["verify", "--config", str(path), "--out", str(out)] + extra) == 0
                outs.append((out / "report.json").read_bytes())
            assert outs[0] == outs[1]
            assert json.loads(outs[0])["metadata"]["base_seed"] == 77
