import numpy as np
import pytest

from elastoprobe import ElasticMedium


@pytest.fixture
def medium():
    return ElasticMedium(lambda0=1.0, mu0=1.0, kappa=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20260811)


def random_pairs(rng, n, r_lo, r_hi):
    """Random point pairs with separation uniform in [r_lo, r_hi]."""
    x = rng.uniform(-2.0, 2.0, (n, 3))
    u = rng.standard_normal((n, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    r = rng.uniform(r_lo, r_hi, (n, 1))
    return x, x + r * u


def fd_gradient(f, x, h):
    out = []
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        out.append((f(x + e) - f(x - e)) / (2 * h))
    return np.moveaxis(np.array(out), 0, -1)


def _fd4(f, x, e, h):
    """4th-order central first derivative along unit vector e."""
    return (-f(x + 2 * h * e) + 8 * f(x + h * e) - 8 * f(x - h * e) + f(x - 2 * h * e)) / (12 * h)


def fd_hessian(f, x, h):
    """4th-order central second derivatives of a scalar-valued f."""
    out = np.zeros((3, 3), dtype=complex)
    for i in range(3):
        ei = np.zeros(3)
        ei[i] = 1.0
        out[i, i] = (
            -f(x + 2 * h * ei) + 16 * f(x + h * ei) - 30 * f(x) + 16 * f(x - h * ei) - f(x - 2 * h * ei)
        ) / (12 * h * h)
        for j in range(i + 1, 3):
            ej = np.zeros(3)
            ej[j] = 1.0
            val = _fd4(lambda p: _fd4(f, p, ej, h), x, ei, h)
            out[i, j] = out[j, i] = val
    return out


def fd_jacobian(f, x, h):
    """Central Jacobian of a vector/matrix-valued f; derivative axis last."""
    cols = []
    for m in range(3):
        e = np.zeros(3)
        e[m] = h
        cols.append((f(x + e) - f(x - e)) / (2 * h))
    return np.stack(cols, axis=-1)
