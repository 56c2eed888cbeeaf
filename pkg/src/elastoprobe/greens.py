"""Helmholtz and Kupradze fundamental solutions with exact derivatives.

The scalar kernel is ``G_t(x, y) = exp(i*k_t*r) / (4*pi*r)`` with
``r = |x - y|`` and ``t`` selecting the longitudinal or transversal
wavenumber.  Its derivatives up to third order are radial closed forms:
with ``z = x - y`` and amplitude functions of ``r`` alone,

    grad_l     =  C1 * z_l
    hess_lm    =  A2 * z_l z_m + B2 * delta_lm
    third_klm  =  A3 * z_k z_l z_m + B3 * (delta_kl z_m + delta_km z_l
                                           + delta_lm z_k)

which is fully symmetric in all indices by construction.  The elastic
fundamental tensor is assembled from these:

    Phi   = (k_s^2/k^2) G_s I + (1/k^2) (hess G_s - hess G_p)
    Phi_p = -(1/k^2) hess G_p
    Phi_s = (k_s^2/k^2) G_s I + (1/k^2) hess G_s

All operations broadcast over leading axes of ``x`` and ``y``.
"""

from __future__ import annotations

import math

import numpy as np

from .medium import ContractViolation, ElasticMedium, WavePart

SINGULAR_RADIUS = 1e-8

# Hard cap for the power-series evaluation of the elastic tensor.
SERIES_MAX_TERMS = 200


class SingularEvaluationError(ValueError):
    """Evaluation requested closer to the source point than allowed."""

    def __init__(self, r_min: float):
        self.r_min = r_min
        super().__init__(
            f"evaluation point within {r_min:.3e} of the source "
            f"(guard radius {SINGULAR_RADIUS:.0e})"
        )


def _separation(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Difference vector and its norm, guarded against the singularity."""
    z = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r = np.linalg.norm(z, axis=-1)
    r_min = float(np.min(r)) if r.size else math.inf
    if r_min < SINGULAR_RADIUS:
        raise SingularEvaluationError(r_min)
    return z, r


def green_scalar(x: np.ndarray, y: np.ndarray, part: WavePart, medium: ElasticMedium) -> np.ndarray:
    """Scalar Helmholtz kernel exp(i*k_t*r)/(4*pi*r)."""
    _, r = _separation(x, y)
    k = medium.wavenumber(part)
    return np.exp(1j * k * r) / (4 * np.pi * r)


def _radial_coeffs(k: float, r: np.ndarray):
    """Amplitude functions (C1, A2, B2, A3, B3) including the phase factor.

    Each includes exp(i*k*r)/(4*pi); contracting with the z-monomials listed
    in the module docstring yields the exact partial derivatives.
    """
    ik = 1j * k
    inv_r = 1.0 / r
    inv_r2 = inv_r * inv_r
    inv_r3 = inv_r2 * inv_r
    inv_r4 = inv_r3 * inv_r
    inv_r5 = inv_r4 * inv_r
    phase = np.exp(ik * r) / (4 * np.pi)
    c1 = phase * (ik * inv_r2 - inv_r3)
    a2 = phase * (ik * ik * inv_r3 - 3 * ik * inv_r4 + 3 * inv_r5)
    b2 = phase * (ik * inv_r2 - inv_r3)
    a3 = phase * (ik**3 * inv_r4 - 6 * ik * ik * inv_r5 + 15 * ik * inv_r5 * inv_r - 15 * inv_r5 * inv_r2)
    b3 = phase * (ik * ik * inv_r3 - 3 * ik * inv_r4 + 3 * inv_r5)
    return c1, a2, b2, a3, b3


def green_derivs(
    x: np.ndarray, y: np.ndarray, part: WavePart, medium: ElasticMedium
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradient, Hessian and third-derivative tensor of the scalar kernel.

    Returns arrays of shape ``(..., 3)``, ``(..., 3, 3)`` and
    ``(..., 3, 3, 3)``; derivatives are taken in ``x``.  The Hessian is
    symmetric and the third-order tensor is symmetric under every index
    permutation.
    """
    z, r = _separation(x, y)
    k = medium.wavenumber(part)
    c1, a2, b2, a3, b3 = _radial_coeffs(k, r)

    grad = c1[..., None] * z

    eye = np.eye(3)
    zz = z[..., :, None] * z[..., None, :]
    hess = a2[..., None, None] * zz + b2[..., None, None] * eye

    zzz = zz[..., :, :, None] * z[..., None, None, :]
    sym = (
        eye[:, :, None] * z[..., None, None, :]
        + eye[None, :, :] * z[..., :, None, None]
        + eye[:, None, :] * z[..., None, :, None]
    )
    third = a3[..., None, None, None] * zzz + b3[..., None, None, None] * sym
    return grad, hess, third


def phi_full(x: np.ndarray, y: np.ndarray, medium: ElasticMedium) -> np.ndarray:
    """Kupradze fundamental tensor, shape ``(..., 3, 3)``."""
    gs = green_scalar(x, y, WavePart.S, medium)
    _, hess_s, _ = green_derivs(x, y, WavePart.S, medium)
    _, hess_p, _ = green_derivs(x, y, WavePart.P, medium)
    k2 = medium.kappa**2
    return (medium.kappa_s**2 / k2) * gs[..., None, None] * np.eye(3) + (hess_s - hess_p) / k2


def phi_part(x: np.ndarray, y: np.ndarray, part: WavePart, medium: ElasticMedium) -> np.ndarray:
    """Longitudinal or transversal part of the fundamental tensor."""
    k2 = medium.kappa**2
    if part is WavePart.P:
        _, hess_p, _ = green_derivs(x, y, WavePart.P, medium)
        return -hess_p / k2
    gs = green_scalar(x, y, WavePart.S, medium)
    _, hess_s, _ = green_derivs(x, y, WavePart.S, medium)
    return (medium.kappa_s**2 / k2) * gs[..., None, None] * np.eye(3) + hess_s / k2


def phi_part_grad(
    x: np.ndarray, y: np.ndarray, part: WavePart, j: int, medium: ElasticMedium
) -> np.ndarray:
    """Jacobian of column ``j`` of the P- or S-part, shape ``(..., 3, 3)``.

    Entry ``[l, m]`` is the derivative of component ``l`` of the column with
    respect to ``x_m`` (row convention: row ``l`` is the gradient of
    component ``l``).  ``j`` is a 0-based column index.
    """
    if j not in (0, 1, 2):
        raise ContractViolation(f"column index must be 0, 1 or 2, got {j}")
    k2 = medium.kappa**2
    if part is WavePart.P:
        _, _, third_p = green_derivs(x, y, WavePart.P, medium)
        return -third_p[..., :, j, :] / k2
    grad_s, _, third_s = green_derivs(x, y, WavePart.S, medium)
    ej_term = np.zeros(grad_s.shape[:-1] + (3, 3), dtype=complex)
    ej_term[..., j, :] = grad_s
    return (medium.kappa_s**2 / k2) * ej_term + third_s[..., :, j, :] / k2


def _series_terms(r: float, medium: ElasticMedium) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stable per-order building blocks of the elastic-tensor power series.

    Returns ``(n, A, B)`` where ``A_n = (i*k_s*r)**n / ((n+2) n! mu0)`` and
    ``B_n`` is the analogue with ``k_p`` and ``lambda0 + 2 mu0``.  Computed
    by term ratios so neither the factorial nor ``r**n`` overflows; the
    isotropic series term is ``((n+1) A_n + B_n) / r`` and the dyadic one
    ``(n-1) (A_n - B_n) / r**3`` times the difference dyad.
    """
    n = np.arange(SERIES_MAX_TERMS + 1, dtype=float)
    steps = n[:-1]
    fac = (steps + 2) / ((steps + 3) * (steps + 1))

    a = np.empty(SERIES_MAX_TERMS + 1, dtype=complex)
    a[0] = 1.0 / (2.0 * medium.mu0)
    a[1:] = a[0] * np.cumprod(1j * medium.kappa_s * r * fac)
    b = np.empty(SERIES_MAX_TERMS + 1, dtype=complex)
    b[0] = 1.0 / (2.0 * (medium.lambda0 + 2 * medium.mu0))
    b[1:] = b[0] * np.cumprod(1j * medium.kappa_p * r * fac)
    return n, a, b


def phi_series_info(
    x: np.ndarray, y: np.ndarray, medium: ElasticMedium, tol: float
) -> tuple[np.ndarray, int]:
    """Power-series evaluation of the fundamental tensor; also returns the
    truncation order.

    Both series are summed until the magnitudes of the freshly added terms
    drop below ``tol`` simultaneously; a cap of ``SERIES_MAX_TERMS`` orders
    guards against misuse at large ``kappa * r``.
    """
    if not tol > 0:
        raise ContractViolation("tol must be positive")
    z, r = _separation(x, y)
    if r.ndim != 0:
        raise ContractViolation("phi_series expects a single point pair")
    r = float(r)

    n, a, b = _series_terms(r, medium)
    t_iso = ((n + 1) * a + b) / r
    t_dyad = (n - 1) * (a - b) / r**3
    # r**2 bounds |z_i z_j|, so |t_dyad| * r**2 bounds the dyadic term.
    mags = np.maximum(np.abs(t_iso), np.abs(t_dyad) * r * r)
    below = mags < tol
    n_used = None
    for m in range(1, SERIES_MAX_TERMS + 1):
        if below[m] and below[min(m + 1, SERIES_MAX_TERMS)]:
            n_used = m
            break
    if n_used is None:
        raise ContractViolation(
            f"series did not reach tol={tol:.1e} within {SERIES_MAX_TERMS} terms (kappa*r too large)"
        )
    sl = slice(0, n_used + 1)
    iso = np.sum(t_iso[sl])
    dyad = np.sum(t_dyad[sl])
    return (iso * np.eye(3) - dyad * np.outer(z, z)) / (4 * np.pi), n_used


def phi_series(x: np.ndarray, y: np.ndarray, medium: ElasticMedium, tol: float = 1e-14) -> np.ndarray:
    """Power-series form of the fundamental tensor at one point pair."""
    value, _ = phi_series_info(x, y, medium, tol)
    return value


def phi_grad_series(
    x: np.ndarray,
    y: np.ndarray,
    i: int,
    j: int,
    l: int,
    medium: ElasticMedium,
    tol: float = 1e-14,
) -> complex:
    """Series evaluation of d Phi_ij / d x_l at one point pair.

    The product rule covers all index coincidences in one expression: the
    isotropic series differentiates to ``(n-1) z_l r^(n-3)`` and the dyadic
    one to ``(n-3) z_l z_i z_j r^(n-5) + delta_li z_j r^(n-3)
    + delta_lj z_i r^(n-3)``.
    """
    for idx in (i, j, l):
        if idx not in (0, 1, 2):
            raise ContractViolation(f"indices must be 0, 1 or 2, got {idx}")
    if not tol > 0:
        raise ContractViolation("tol must be positive")
    z, r = _separation(x, y)
    if r.ndim != 0:
        raise ContractViolation("phi_grad_series expects a single point pair")
    r = float(r)

    n, a, b = _series_terms(r, medium)
    c_iso = ((n + 1) * a + b) / r**3
    c_dyad = (n - 1) * (a - b)
    delta_ij = 1.0 if i == j else 0.0
    t_iso = c_iso * delta_ij * (n - 1) * z[l]
    poly = (n - 3) * z[l] * z[i] * z[j] / r**5
    if l == i:
        poly = poly + z[j] / r**3
    if l == j:
        poly = poly + z[i] / r**3
    t_dyad = c_dyad * poly
    mags = np.abs(t_iso) + np.abs(t_dyad)
    n_used = None
    for m in range(1, SERIES_MAX_TERMS + 1):
        if mags[m] < tol and mags[min(m + 1, SERIES_MAX_TERMS)] < tol:
            n_used = m
            break
    if n_used is None:
        raise ContractViolation(
            f"series did not reach tol={tol:.1e} within {SERIES_MAX_TERMS} terms (kappa*r too large)"
        )
    sl = slice(0, n_used + 1)
    return complex(np.sum(t_iso[sl]) - np.sum(t_dyad[sl])) / (4 * np.pi)


def traction(
    jacobian: np.ndarray,
    div: np.ndarray,
    curl: np.ndarray,
    nu: np.ndarray,
    lam: float,
    mu: float,
) -> np.ndarray:
    """Boundary traction ``2*mu*(J nu) + lam*div*nu + mu*(nu x curl)``.

    ``jacobian`` has entry ``[l, m] = d u_l / d x_m``; ``nu`` must be a unit
    vector.  Broadcasts over leading axes.
    """
    nu = np.asarray(nu, dtype=float)
    norms = np.linalg.norm(nu, axis=-1)
    if not np.allclose(norms, 1.0, atol=1e-10):
        raise ContractViolation("normal vectors must have unit length")
    j_nu = np.einsum("...lm,...m->...l", np.asarray(jacobian), nu)
    div = np.asarray(div)
    return 2 * mu * j_nu + lam * div[..., None] * nu + mu * np.cross(nu, np.asarray(curl))


def traction_from_jacobian(jacobian: np.ndarray, nu: np.ndarray, lam: float, mu: float) -> np.ndarray:
    """Traction via the stress tensor: ``lam*tr(J)*nu + mu*(J + J^T) nu``."""
    jac = np.asarray(jacobian)
    nu = np.asarray(nu, dtype=float)
    div = np.trace(jac, axis1=-2, axis2=-1)
    sym_nu = np.einsum("...lm,...m->...l", jac, nu) + np.einsum("...ml,...m->...l", jac, nu)
    return lam * div[..., None] * nu + mu * sym_nu
