"""Herglotz densities approximating point-source kernels on a reference
boundary.

The first-kind equation ``H_t g = G_t(., y)`` on the boundary of an
approximation domain B is exponentially ill-posed, so it is solved by
Tikhonov regularization over a geometric parameter schedule; the density
retained for indicator evaluation is the last one before the boundary
residual stagnates.  All inner products are discrete quadrature norms with
explicit weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.special import spherical_jn

from .geometry import DirectionGrid, SurfaceMesh
from .greens import green_scalar
from .medium import ContractViolation, ElasticMedium, WavePart


@dataclass(frozen=True, eq=False)
class ApproximationDomain:
    """Reference domain B whose boundary carries the density fit.

    The theory wants the scatterer inside B and the probe point outside its
    closure; the flags record what the caller actually guaranteed.
    """

    boundary: SurfaceMesh
    contains_scatterer: bool = True
    excluded_point: tuple[float, float, float] | None = None


@dataclass(eq=False)
class HerglotzDensity:
    """Regularized density ``g`` on a direction grid for one wave part."""

    grid: DirectionGrid
    values: np.ndarray  # (n_grid,) complex, nodal values (weights not absorbed)
    wave: WavePart
    y: np.ndarray
    alpha: float
    residual: float  # relative L2 misfit on the fit boundary
    stage: int

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.grid.weights * np.abs(self.values) ** 2)))


@dataclass(eq=False)
class DensitySequence:
    """Tikhonov path over the alpha schedule with the stagnation selection."""

    densities: list[HerglotzDensity]
    selected_index: int
    converged: bool

    @property
    def selected(self) -> HerglotzDensity:
        return self.densities[self.selected_index]

    @property
    def residuals(self) -> np.ndarray:
        return np.array([d.residual for d in self.densities])


@dataclass(frozen=True)
class TikhonovSchedule:
    """Geometric schedule alpha_n = alpha0 * rho**n with stagnation stopping."""

    alpha0: float = 1e-2
    rho: float = 0.5
    n_max: int = 12
    stagnation: float = 0.05
    fail_residual: float = 0.5

    def alphas(self) -> np.ndarray:
        return self.alpha0 * self.rho ** np.arange(self.n_max + 1)


def herglotz_matrix(
    grid: DirectionGrid, boundary: SurfaceMesh, part: WavePart, medium: ElasticMedium
) -> np.ndarray:
    """Discrete Herglotz operator, shape (n_boundary, n_grid).

    Entry (m, k) is ``exp(i*k_t x_m . d_k) * w_k`` with the direction weight
    absorbed, so ``matrix @ g`` samples the Herglotz wave of the nodal
    density ``g`` on the boundary.
    """
    kt = medium.wavenumber(part)
    return np.exp(1j * kt * (boundary.nodes @ grid.nodes.T)) * grid.weights[None, :]


class HerglotzSystem:
    """Weighted SVD of the Herglotz operator, reusable across probe points.

    With ``W_B`` and ``W_d`` the boundary and direction quadrature weights,
    the Tikhonov solution for target samples ``f`` minimizes
    ``|H g - f|_{W_B}^2 + alpha |g|_{W_d}^2``; one SVD of the symmetrized
    operator serves every alpha in a schedule through its filter factors.
    """

    def __init__(self, grid: DirectionGrid, boundary: SurfaceMesh, part: WavePart, medium: ElasticMedium):
        self.grid = grid
        self.boundary = boundary
        self.part = part
        self.medium = medium
        self._sqrt_wb = np.sqrt(boundary.weights)
        self._sqrt_wd = np.sqrt(grid.weights)
        h = herglotz_matrix(grid, boundary, part, medium)
        h_tilde = (self._sqrt_wb[:, None] * h) / self._sqrt_wd[None, :]
        self._u, self._s, self._vh = scipy.linalg.svd(
            h_tilde, full_matrices=False, overwrite_a=True, lapack_driver="gesdd"
        )

    def tikhonov_path(self, y: np.ndarray, schedule: TikhonovSchedule) -> DensitySequence:
        """Solve the normal equations for every alpha in the schedule."""
        y = np.asarray(y, dtype=float)
        target = green_scalar(self.boundary.nodes, y, self.part, self.medium)
        f = self._sqrt_wb * target
        norm_f = np.linalg.norm(f)
        ut_f = self._u.conj().T @ f
        densities = []
        for stage, alpha in enumerate(schedule.alphas()):
            filt = self._s / (self._s**2 + alpha)
            g_tilde = self._vh.conj().T @ (filt * ut_f)
            g = g_tilde / self._sqrt_wd
            fitted = self._s * filt * ut_f
            misfit_sq = norm_f**2 - 2 * np.real(np.vdot(ut_f, fitted)) + np.linalg.norm(fitted) ** 2
            residual = float(np.sqrt(max(misfit_sq, 0.0)) / norm_f)
            densities.append(
                HerglotzDensity(
                    grid=self.grid, values=g, wave=self.part, y=y,
                    alpha=float(alpha), residual=residual, stage=stage,
                )
            )
        residuals = np.array([d.residual for d in densities])
        selected = len(densities) - 1
        for n in range(len(densities) - 1):
            if residuals[n + 1] > (1.0 - schedule.stagnation) * residuals[n]:
                selected = n
                break
        converged = residuals[selected] <= schedule.fail_residual
        return DensitySequence(densities=densities, selected_index=selected, converged=converged)


def _point_in_domain(domain: ApproximationDomain, y: np.ndarray) -> bool:
    from .geometry import point_inside

    b = domain.boundary
    return bool(point_inside(b.kind, b.params, np.asarray(y, dtype=float), center=b.center))


def tikhonov_density(
    y: np.ndarray,
    domain: ApproximationDomain,
    part: WavePart,
    medium: ElasticMedium,
    schedule: TikhonovSchedule | None = None,
    system: HerglotzSystem | None = None,
    grid: DirectionGrid | None = None,
) -> DensitySequence:
    """Regularized densities fitting ``G_t(., y)`` on the domain boundary.

    ``y`` must lie outside the domain.  A non-convergent path (residual above
    the schedule's failure threshold at the deepest alpha) is returned with
    ``converged=False`` rather than raised, so scans can flag and continue.
    """
    y = np.asarray(y, dtype=float)
    if _point_in_domain(domain, y):
        raise ContractViolation("probe point lies inside the approximation domain")
    if schedule is None:
        schedule = TikhonovSchedule()
    if system is None:
        if grid is None:
            raise ContractViolation("either a prebuilt system or a direction grid is required")
        system = HerglotzSystem(grid, domain.boundary, part, medium)
    return system.tikhonov_path(y, schedule)


def vector_density(g: HerglotzDensity, j: int, medium: ElasticMedium) -> np.ndarray:
    """Vector density for tensor column ``j`` built from a scalar density.

    P: ``(k_p^2/k^2) d_j d g(d)`` (parallel to d); S: ``(k_s^2/k^2)
    (e_j - d_j d) g(d)`` (tangential).  Returns (n_grid, 3).
    """
    if j not in (0, 1, 2):
        raise ContractViolation(f"column index must be 0, 1 or 2, got {j}")
    d = g.grid.nodes
    if g.wave is WavePart.P:
        return (medium.kappa_p**2 / medium.kappa**2) * (d[:, j] * g.values)[:, None] * d
    e = np.zeros(3)
    e[j] = 1.0
    tangent = e[None, :] - d[:, j : j + 1] * d
    return (medium.kappa_s**2 / medium.kappa**2) * g.values[:, None] * tangent


def herglotz_eval(
    h: np.ndarray,
    grid: DirectionGrid,
    x: np.ndarray,
    part: WavePart,
    medium: ElasticMedium,
) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature evaluation of a vector Herglotz wave and its Jacobian.

    ``h``: nodal vector density (n_grid, 3); the direction weights are
    applied here.  Returns (value (..., 3), jacobian (..., 3, 3)) with
    ``jac[l, m] = d v_l / d x_m``.
    """
    x = np.asarray(x, dtype=float)
    kt = medium.wavenumber(part)
    h = np.asarray(h, dtype=complex)
    wh = grid.weights[:, None] * h
    phase = np.exp(1j * kt * (x @ grid.nodes.T))  # (..., n)
    value = phase @ wh
    jac = 1j * kt * np.einsum("...k,kl,km->...lm", phase, wh, grid.nodes)
    return value, jac


def bessel_degenerate_degrees(radius: float, medium: ElasticMedium, l_max: int, tol: float = 1e-13) -> list[int]:
    """Spherical-Bessel degrees numerically annihilated on a sphere of the
    given radius; nonempty means the interior eigenvalue precaution should
    perturb the radius."""
    out = []
    for part in (WavePart.P, WavePart.S):
        kr = medium.wavenumber(part) * radius
        jl = spherical_jn(np.arange(l_max + 1), kr)
        scale = np.abs(jl).max()
        out.extend(int(l) for l in np.nonzero(np.abs(jl) < tol * scale)[0])
    return sorted(set(out))
