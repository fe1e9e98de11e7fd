"""Acceptance criteria.  Each test prints one CRITERION line with its outcome."""
import os
import time

import numpy as np
import pytest

from fraclap import dunford_integral as dt
from fraclap import harness as hs
from fraclap.analytic import getoor_energy, square_eigen_data
from fraclap.extension import discrete_energy, extension_energy_error, solve_extension
from fraclap.fem_core import FeFunction, assemble_cylinder, assemble_p1, apply_dirichlet
from fraclap.integral_fem import assemble_integral_stiffness, solve_integral
from fraclap.mesh import (cylinder_mesh, disk_tri_mesh, graded_y_partition, uniform_interval_mesh,
                          unit_square_tri_mesh)
from fraclap.spectral_sinc import scalar_sinc_power, solve_spectral_sinc

import fixture_check

THREADS = os.cpu_count() or 1


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail, seconds):
        with capsys.disabled():
            print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'} ({seconds:.1f} s) {detail}")
        assert ok, detail
    return emit


def one(x):
    return np.ones_like(np.asarray(x, dtype=float))


def test_criterion_01_scalar_sinc(report):
    t0 = time.perf_counter()
    worst = 0.0
    for s in (0.2, 0.5, 0.8):
        for lam in (2 * np.pi ** 2, 1e4):
            for k in (1.0, 0.5, 0.25):
                err = abs(scalar_sinc_power(s, lam, k) - lam ** (-s))
                worst = max(worst, err / np.exp(-np.pi ** 2 / (2 * k)))
    secs = time.perf_counter() - t0
    report(1, worst <= 5 and secs < 1, f"max error / exp(-pi^2/(2k)) = {worst:.3g} (limit 5)", secs)


def test_criterion_02_spectral_square(report):
    t0 = time.perf_counter()
    rates = []
    for s in (0.2, 0.8):
        rep = hs.run_study(hs.StudyConfig("spectral-sinc", "square", s, [8, 16, 32, 64],
                                          threads=THREADS))
        rates.append(rep.fitted_rate)
    secs = time.perf_counter() - t0
    ok = all(1.7 <= r <= 2.3 for r in rates) and secs < 120
    report(2, ok, f"L2 rates {np.round(rates, 3).tolist()} (window [1.7, 2.3])", secs)


def test_criterion_03_extension_1d(report):
    t0 = time.perf_counter()
    rates, decreasing = [], True
    for s in (0.2, 0.8):
        l2 = hs.run_study(hs.StudyConfig("extension", "interval", s, [16, 32, 64, 128]))
        en = hs.run_study(hs.StudyConfig("extension", "interval", s, [16, 32, 64, 128],
                                         metric="energy", abscissa="dofs"))
        e = [r["error"] for r in l2.rows]
        decreasing &= all(a > b for a, b in zip(e, e[1:]))
        rates.append(en.fitted_rate)
    secs = time.perf_counter() - t0
    ok = decreasing and all(0.35 <= r <= 0.65 for r in rates) and secs < 120
    report(3, ok, f"trace L2 decreasing={decreasing}, energy rates vs dofs "
           f"{np.round(rates, 3).tolist()} (window [0.35, 0.65])", secs)


@pytest.mark.slow
def test_criterion_04_extension_square(report):
    t0 = time.perf_counter()
    s = 0.5
    _, f, u, _ = square_eigen_data(s, 1, 1)
    pts = []
    for n in (8, 16, 32):
        base = unit_square_tri_mesh(n)
        cyl, _ = solve_extension(base, s, f, M=n)
        pts.append((1.0 / (base.n_elements * n), extension_energy_error(cyl, s, f, u)))
    rate = hs.estimate_rate(pts)[0]
    secs = time.perf_counter() - t0
    report(4, 0.26 <= rate <= 0.41 and secs < 1200,
           f"energy rate vs cylinder cells {rate:.3f} (window [0.26, 0.41])", secs)


def _integral_rates(graded):
    out = []
    for s in (0.25, 0.5, 0.75):
        rep = hs.run_study(hs.StudyConfig("integral", "interval", s, [64, 128, 256, 512],
                                          metric="energy", graded=graded, threads=THREADS))
        out.append(rep.fitted_rate)
    return out


def test_criterion_05_integral_uniform(report):
    t0 = time.perf_counter()
    rates = _integral_rates(None)
    secs = time.perf_counter() - t0
    report(5, all(0.4 <= r <= 0.6 for r in rates) and secs < 180,
           f"energy rates {np.round(rates, 3).tolist()} (window [0.4, 0.6])", secs)


def test_criterion_06_integral_graded(report):
    t0 = time.perf_counter()
    rates = _integral_rates(2.0)
    secs = time.perf_counter() - t0
    report(6, all(r >= 0.85 for r in rates) and secs < 180,
           f"energy rates {np.round(rates, 3).tolist()} (lower bound 0.85)", secs)


@pytest.mark.slow
def test_criterion_07_integral_disk(report):
    t0 = time.perf_counter()
    levels = [0.2, 0.14, 0.1, 0.07]
    en = hs.run_study(hs.StudyConfig("integral", "disk", 0.5, levels, metric="energy",
                                     threads=THREADS))
    l2 = hs.run_study(hs.StudyConfig("integral", "disk", 0.25, levels, metric="l2",
                                     threads=THREADS))
    secs = time.perf_counter() - t0
    ok = 0.4 <= en.fitted_rate <= 0.6 and 0.65 <= l2.fitted_rate <= 0.95 and secs < 1800
    report(7, ok, f"energy rate {en.fitted_rate:.3f} (window [0.4, 0.6]), "
           f"L2 rate {l2.fitted_rate:.3f} (window [0.65, 0.95])", secs)


def test_criterion_08_oracle_fixtures(report):
    t0 = time.perf_counter()
    e1, e2 = fixture_check.errors_1d(), fixture_check.errors_2d()
    secs = time.perf_counter() - t0
    ok = e1.size == 9 and e2.size == 50 and max(e1.max(), e2.max()) <= 1e-6 and secs < 120
    report(8, ok, f"max relative error 1D {e1.max():.2e}, 2D {e2.max():.2e} (limit 1e-6)", secs)


def test_criterion_09_dt_integral(report):
    t0 = time.perf_counter()
    s = 0.5
    mesh = uniform_interval_mesh(-1, 1, 256)
    nmesh = dt.normalize_mesh(mesh)[0]
    cfg = dt.default_config(s, nmesh.h_max)
    elliptic = dt.check_ellipticity(cfg, nmesh.h_max, s)
    U = dt.solve_dt_integral(mesh, s, one, cfg, threads=THREADS)
    V = solve_integral(mesh, s, one, threads=THREADS)
    zero = lambda x: 0 * x  # noqa: E731
    rel = hs.l2_error(FeFunction(mesh, U.values - V.values), zero) / hs.l2_error(V, zero)
    xi = np.linspace(1, 100, 1000)
    worst = 0.0
    for ss in (0.3, 0.5, 0.7):
        c = dt.dt_config(ss, cfg.k, cfg.M)
        S = dt.dt_scalar_symbol(ss, xi, c.k, c.N_plus, c.N_minus)
        err = np.abs(S - xi ** (2 * ss)) / xi ** (2 * ss)
        worst = max(worst, err.max() / np.exp(-np.pi ** 2 / (4 * c.k)))
    secs = time.perf_counter() - t0
    ok = elliptic and rel <= 0.05 and worst <= 10 and secs < 180
    report(9, ok, f"ellipticity={elliptic}, relative L2 difference {rel:.4f} (limit 0.05), "
           f"symbol error / exp(-pi^2/(4k)) = {worst:.3g} (limit 10)", secs)


def _spd(A):
    A = A.toarray() if hasattr(A, "toarray") else A
    return bool(np.array_equal(A, A.T) and np.linalg.eigvalsh(A).min() > 0)


def test_criterion_10_properties(report):
    t0 = time.perf_counter()
    checks = {}
    # symmetric positive definite matrices on free dofs
    mats = []
    for m in (uniform_interval_mesh(0, 1, 12), disk_tri_mesh(1.0, 3)):
        M, A = assemble_p1(m)
        mats += [apply_dirichlet(M, np.zeros(m.n_vertices), m)[0],
                 apply_dirichlet(A, np.zeros(m.n_vertices), m)[0]]
    for s in (0.2, 0.5, 0.8):
        mats.append(assemble_integral_stiffness(uniform_interval_mesh(-1, 1, 12), s))
        mats.append(assemble_integral_stiffness(disk_tri_mesh(1.0, 3), s))
        cm = cylinder_mesh(uniform_interval_mesh(0, 1, 6), graded_y_partition(1.5, 4, 2.0))
        S = assemble_cylinder(cm, s).toarray()
        mats.append(S)
    nm = dt.normalize_mesh(uniform_interval_mesh(-1, 1, 10))[0]
    cfg = dt.default_config(0.5, nm.h_max)
    op = dt.DtOperator(nm, cfg, 0.5)
    K = np.column_stack([op.matvec(e) for e in np.eye(op.n)])
    checks["spd"] = all(_spd(A) for A in mats) and np.allclose(K, K.T, atol=1e-12) \
        and np.linalg.eigvalsh(0.5 * (K + K.T)).min() > 0
    # Galerkin energy monotone under refinement and bounded by the exact energy
    ok = True
    for s in (0.25, 0.75):
        en = []
        for n in (8, 16, 32, 64):
            U, A = solve_integral(uniform_interval_mesh(-1, 1, n), s, one, return_matrix=True)
            x = U.values[U.mesh.free]
            en.append(x @ A.matvec(x))
        ok &= all(a < b for a, b in zip(en, en[1:])) and en[-1] <= getoor_energy(1, s)
        ex = [discrete_energy(solve_extension(uniform_interval_mesh(0, 1, n), s,
                                              lambda x: np.sin(np.pi * x), M=n)[0], s)
              for n in (8, 16, 32)]
        ok &= ex[0] < ex[1] < ex[2]
    checks["energy_monotone"] = bool(ok)
    # truncated form dominates the large-M form
    big = dt.dt_config(0.5, cfg.k, 5 * cfg.M, cfg.beta)
    ref = dt.DtOperator(nm, big, 0.5, nest_with=cfg)
    rng = np.random.default_rng(0)
    X = rng.standard_normal((5, op.n))
    checks["dt_monotone"] = all(x @ op.matvec(x) >= x @ ref.matvec(x) for x in X)
    # identical results for any thread count
    m2 = disk_tri_mesh(1.0, 4)
    sq = unit_square_tri_mesh(8)
    f = lambda x: np.sin(np.pi * x[..., 0]) * x[..., 1]  # noqa: E731
    checks["threads"] = (
        np.array_equal(assemble_integral_stiffness(m2, 0.4, threads=1).toarray(),
                       assemble_integral_stiffness(m2, 0.4, threads=THREADS).toarray())
        and np.array_equal(solve_spectral_sinc(sq, 0.3, f, threads=1).values,
                           solve_spectral_sinc(sq, 0.3, f, threads=max(THREADS, 2)).values)
        and np.array_equal(dt.DtOperator(nm, cfg, 0.5, threads=1).matvec(X[0]),
                           dt.DtOperator(nm, cfg, 0.5, threads=max(THREADS, 2)).matvec(X[0])))
    secs = time.perf_counter() - t0
    report(10, all(checks.values()) and secs < 120, str(checks), secs)
