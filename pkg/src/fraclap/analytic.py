"""Closed-form constants and exact solutions used as reference values.

Everything in this module is a pure function of its arguments.  The only
state is a small cache holding the tabulated two dimensional tail function.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline


@dataclass(frozen=True)
class FracOrder:
    """Fractional order s together with the constants derived from it.

    Attributes
    ----------
    s : float
        Order of the operator, strictly between 0 and 1.
    """

    s: float

    def __post_init__(self):
        if not (0.0 < self.s < 1.0):
            raise ValueError(f"fractional order must lie in (0, 1), got {self.s}")

    @property
    def alpha(self) -> float:
        """Exponent of the extension weight y**alpha."""
        return 1.0 - 2.0 * self.s

    @property
    def d_s(self) -> float:
        """Normalization of the conormal derivative in the extension problem."""
        s = self.s
        return 2.0 ** (1.0 - 2.0 * s) * special.gamma(1.0 - s) / special.gamma(s)

    def C_ds(self, d: int) -> float:
        """Normalization constant of the singular integral kernel in dimension d."""
        s = self.s
        return (2.0 ** (2 * s) * s * special.gamma(s + d / 2.0)
                / (np.pi ** (d / 2.0) * special.gamma(1.0 - s)))


def frac_order(s) -> FracOrder:
    """Build a :class:`FracOrder`, accepting an existing instance unchanged."""
    if isinstance(s, FracOrder):
        return s
    return FracOrder(float(s))


def gamma_fn(x):
    """Gamma function for positive arguments."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("gamma_fn is only defined here for positive arguments")
    out = special.gamma(x)
    return float(out) if out.ndim == 0 else out


def bessel_k(s: float, z):
    """Modified Bessel function of the second kind K_s(z) for z > 0."""
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise ValueError("bessel_k requires z > 0")
    out = special.kv(s, z)
    return float(out) if out.ndim == 0 else out


def _radius(d, x):
    x = np.asarray(x, dtype=float)
    if d == 1:
        return np.abs(x)
    if d == 2:
        return np.hypot(x[..., 0], x[..., 1])
    raise ValueError("only d = 1 and d = 2 are supported")


def getoor_constant(d: int, s) -> float:
    """Amplitude of the solution with unit right hand side on the unit ball."""
    s = frac_order(s).s
    return (special.gamma(d / 2.0)
            / (2.0 ** (2 * s) * special.gamma((d + 2 * s) / 2.0) * special.gamma(1 + s)))


def getoor_solution(d: int, s, x):
    """Exact solution of the integral problem on the unit ball with f = 1.

    Parameters
    ----------
    d : {1, 2}
    s : float or FracOrder
    x : array_like
        Points; shape (...,) for d = 1 and (..., 2) for d = 2.
    """
    s = frac_order(s).s
    r = _radius(d, x)
    return getoor_constant(d, s) * np.maximum(1.0 - r * r, 0.0) ** s


def getoor_energy(d: int, s) -> float:
    """Value of the integral of the Getoor solution, i.e. its energy with f = 1."""
    s = frac_order(s).s
    c = getoor_constant(d, s)
    if d == 1:
        return c * np.sqrt(np.pi) * special.gamma(s + 1) / special.gamma(s + 1.5)
    if d == 2:
        return c * np.pi / (s + 1.0)
    raise ValueError("only d = 1 and d = 2 are supported")


def jacobi_p2(s: float, t):
    """Jacobi polynomial P_2^{(s, 0)} written out as a quadratic in t."""
    t = np.asarray(t, dtype=float)
    tm = t - 1.0
    return ((s + 1) * (s + 2) / 2.0 + (s + 2) * (s + 3) * tm / 2.0
            + (s + 3) * (s + 4) * tm * tm / 8.0)


def jacobi_solution(s, x):
    """Right hand side and exact solution of the degree two Jacobi example on the unit disk.

    Returns
    -------
    f, u : ndarray
        Values at the points ``x`` of shape (..., 2).
    """
    s = frac_order(s).s
    r2 = _radius(2, x) ** 2
    p = jacobi_p2(s, 2.0 * r2 - 1.0)
    f = (special.gamma(3 + s) / 2.0 ** (1 - s)) ** 2 * p
    u = np.maximum(1.0 - r2, 0.0) ** s * p
    return f, u


def jacobi_energy(s) -> float:
    """Integral of f*u over the unit disk for the Jacobi example."""
    s = frac_order(s).s
    # polar coordinates, t = 2r^2 - 1, r dr = dt/4, (1 - r^2) = (1 - t)/2
    x, w = special.roots_jacobi(20, s, 0.0)
    c = (special.gamma(3 + s) / 2.0 ** (1 - s)) ** 2
    return float(2 * np.pi * c * 2.0 ** (-s) / 4.0 * np.sum(w * jacobi_p2(s, x) ** 2))


def square_eigen_data(s, m: int = 1, n: int = 1):
    """Eigenpair data on the unit square.

    Returns
    -------
    lam : float
        Dirichlet eigenvalue pi^2 (m^2 + n^2).
    f, u : callable
        Right hand side lam**s * phi and solution phi, taking points (..., 2).
    psi : callable
        Profile in the extended variable, psi(0) = 1.
    """
    s = frac_order(s).s
    if m < 1 or n < 1:
        raise ValueError("mode numbers must be positive")
    lam = np.pi ** 2 * (m * m + n * n)

    def u(x):
        x = np.asarray(x, dtype=float)
        return np.sin(m * np.pi * x[..., 0]) * np.sin(n * np.pi * x[..., 1])

    def f(x):
        return lam ** s * u(x)

    def psi(y):
        y = np.asarray(y, dtype=float)
        if s == 0.5:
            return np.exp(-np.sqrt(lam) * y)
        z = np.sqrt(lam) * y
        out = np.ones_like(z)
        pos = z > 0
        zp = z[pos]
        out[pos] = 2.0 ** (1 - s) / special.gamma(s) * zp ** s * special.kv(s, zp)
        return out

    return lam, f, u, psi


def interval_eigen_data(s, m: int = 1, a: float = 0.0, b: float = 1.0):
    """One dimensional analogue of :func:`square_eigen_data` on (a, b)."""
    s = frac_order(s).s
    L = b - a
    lam = (m * np.pi / L) ** 2

    def u(x):
        return np.sin(m * np.pi * (np.asarray(x, dtype=float) - a) / L)

    def f(x):
        return lam ** s * u(x)

    return lam, f, u


def _disk_tail(r, s, R, nquad=4096):
    # integral over |y| > R of |x - y|^{-2-2s}, radial part done exactly
    theta = (np.arange(nquad) + 0.5) * (2 * np.pi / nquad)
    r = np.atleast_1d(r)[:, None]
    t = -r * np.cos(theta) + np.sqrt(R * R - (r * np.sin(theta)) ** 2)
    return (2 * np.pi / nquad) * np.sum(t ** (-2 * s), axis=1) / (2 * s)


@lru_cache(maxsize=32)
def _disk_tail_table(s, R, npts=512):
    r = np.linspace(0.0, 1.0, npts)
    return CubicSpline(r, _disk_tail(r, s, R))


def rho_tail(d: int, s, R: float, x):
    """Tail function: integral of the kernel over the exterior of the ball of radius R.

    For d = 1 a closed form is used.  For d = 2 the radial function is
    tabulated once per (s, R) and interpolated with cubic splines.
    """
    s = frac_order(s).s
    if R <= 1:
        raise ValueError("R must exceed the domain radius 1")
    if d == 1:
        x = np.asarray(x, dtype=float)
        return ((R - x) ** (-2 * s) + (R + x) ** (-2 * s)) / (2 * s)
    if d == 2:
        r = _radius(2, x)
        return _disk_tail_table(s, float(R))(r)
    raise ValueError("only d = 1 and d = 2 are supported")


def balakrishnan_scalar(s, lam):
    """Exact value lam**(-s) that the Balakrishnan integral represents."""
    s = frac_order(s).s
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("lam must be positive")
    out = lam ** (-s)
    return float(out) if out.ndim == 0 else out


def halfline_kernel_identity(s) -> float:
    """Closed value of the integral of t^(1-2s)/(1+t^2) over (0, inf)."""
    s = frac_order(s).s
    return np.pi / (2.0 * np.sin(np.pi * s))
