import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special

from fraclap import analytic
from fraclap.analytic import FracOrder, frac_order

orders = st.floats(min_value=0.05, max_value=0.95)


def test_frac_order_rejects_bounds():
    for bad in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(ValueError):
            FracOrder(bad)
    s = FracOrder(0.3)
    assert frac_order(s) is s


def test_half_order_constants():
    s = FracOrder(0.5)
    assert s.alpha == 0.0
    assert s.d_s == pytest.approx(1.0)
    assert s.C_ds(1) == pytest.approx(1 / np.pi)
    assert s.C_ds(2) == pytest.approx(1 / (2 * np.pi))


@given(orders)
def test_alpha_in_open_interval(s):
    a = FracOrder(s).alpha
    assert -1 < a < 1


def test_gamma_and_bessel():
    assert analytic.gamma_fn(0.5) == pytest.approx(np.sqrt(np.pi))
    with pytest.raises(ValueError):
        analytic.gamma_fn(0.0)
    z = np.array([0.3, 1.0, 4.0])
    assert np.allclose(analytic.bessel_k(0.5, z), np.sqrt(np.pi / (2 * z)) * np.exp(-z))
    with pytest.raises(ValueError):
        analytic.bessel_k(0.5, -1.0)


def test_getoor_energy_matches_quadrature():
    for d in (1, 2):
        for s in (0.25, 0.5, 0.75):
            if d == 1:
                val = integrate.quad(lambda x: analytic.getoor_solution(1, s, x), -1, 1)[0]
            else:
                val = integrate.quad(lambda r: 2 * np.pi * r * analytic.getoor_solution(
                    2, s, np.array([r, 0.0])), 0, 1)[0]
            assert analytic.getoor_energy(d, s) == pytest.approx(val, rel=1e-8)


def test_getoor_half_order_interval():
    # f = 1 on (-1, 1) with s = 1/2 gives energy pi/2 times the amplitude
    c = analytic.getoor_constant(1, 0.5)
    assert c == pytest.approx(1.0)
    assert analytic.getoor_energy(1, 0.5) == pytest.approx(np.pi / 2)


def test_jacobi_polynomial_against_scipy():
    t = np.linspace(-1, 1, 7)
    for s in (0.25, 0.75):
        assert np.allclose(analytic.jacobi_p2(s, t), special.eval_jacobi(2, s, 0.0, t))


def test_jacobi_energy_matches_quadrature():
    s = 0.25

    def g(r):
        f, u = analytic.jacobi_solution(s, np.array([r, 0.0]))
        return 2 * np.pi * r * f * u

    assert analytic.jacobi_energy(s) == pytest.approx(integrate.quad(g, 0, 1, limit=200)[0],
                                                      rel=1e-7)


def test_square_eigen_data():
    lam, f, u, psi = analytic.square_eigen_data(0.3, 1, 2)
    assert lam == pytest.approx(5 * np.pi ** 2)
    x = np.array([[0.25, 0.25], [0.5, 0.1]])
    assert np.allclose(f(x), lam ** 0.3 * u(x))
    assert psi(np.array([0.0]))[0] == pytest.approx(1.0)
    y = np.array([0.5, 1.0, 2.0])
    assert np.all(np.diff(psi(y)) < 0)
    with pytest.raises(ValueError):
        analytic.square_eigen_data(0.3, 0, 1)


def test_interval_eigen_data():
    lam, f, u = analytic.interval_eigen_data(0.5, 2, 0.0, 2.0)
    assert lam == pytest.approx(np.pi ** 2)
    assert f(0.5) == pytest.approx(np.pi * u(0.5))


def test_rho_tail_one_dimension():
    s, R = 0.4, 2.0
    x = 0.3
    val = (integrate.quad(lambda y: abs(x - y) ** (-1 - 2 * s), R, np.inf)[0]
           + integrate.quad(lambda y: abs(x - y) ** (-1 - 2 * s), -np.inf, -R)[0])
    assert analytic.rho_tail(1, s, R, x) == pytest.approx(val, rel=1e-10)


def test_rho_tail_disk_center():
    s, R = 0.5, 2.0
    # at the center the tail is 2 pi R^(-2s) / (2s)
    assert analytic.rho_tail(2, s, R, np.array([0.0, 0.0])) == pytest.approx(
        2 * np.pi * R ** (-2 * s) / (2 * s), rel=1e-8)
    with pytest.raises(ValueError):
        analytic.rho_tail(2, s, 0.5, np.zeros(2))


def test_balakrishnan_identities():
    assert analytic.balakrishnan_scalar(0.5, 4.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        analytic.balakrishnan_scalar(0.5, 0.0)
    s = 0.3
    val = integrate.quad(lambda t: t ** (1 - 2 * s) / (1 + t * t), 0, np.inf)[0]
    assert analytic.halfline_kernel_identity(s) == pytest.approx(val, rel=1e-8)
