"""Synthetic far-field data via method-of-fundamental-solutions collocation.

The scattered field of a traction-free obstacle is represented as a
superposition of Kupradze-tensor columns anchored at source points inside the
obstacle.  Collocating the traction boundary condition in a weighted
least-squares sense gives an overdetermined system solved by truncated SVD;
the exponential ill-conditioning of fundamental-solution bases makes the
spectral cutoff mandatory, and the relative boundary residual doubles as a
quality certificate for every generated dataset.

Far-field amplitudes follow the radiating expansion

    u(x) = exp(i*k_p*|x|)/|x| * u_p^inf(xhat)
         + exp(i*k_s*|x|)/|x| * u_s^inf(xhat) + O(1/|x|^2)

so a unit source column at ``z`` contributes the amplitude tensors

    P: (k_p^2 / (4*pi*k^2)) * (xhat xhat^T) * exp(-i*k_p*xhat.z)
    S: (k_s^2 / (4*pi*k^2)) * (I - xhat xhat^T) * exp(-i*k_s*xhat.z)

which are rederived numerically in the test suite from the large-radius
limit of the tensor itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .geometry import DirectionGrid, SurfaceMesh
from .greens import SingularEvaluationError, _radial_coeffs, _separation
from .medium import ContractViolation, ElasticMedium, WavePart


class AssemblyError(RuntimeError):
    """Far-field assembly aborted because solves missed the residual target."""

    def __init__(self, message: str, bad_directions: list[int]):
        self.bad_directions = bad_directions
        super().__init__(message)


@dataclass(frozen=True)
class PlaneWave:
    """Plane pressure or shear incidence.

    Pressure: ``d * exp(i*k_p*d.x)``.  Shear with polarization index ``j``
    (0-based): ``(e_j - d_j*d) * exp(i*k_s*d.x)``, which is tangential since
    ``(e_j - d_j*d) . d = 0``.
    """

    kind: WavePart
    d: tuple[float, float, float]
    j: int | None = None

    def __post_init__(self) -> None:
        d = np.asarray(self.d, dtype=float)
        if abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise ContractViolation("incident direction must be a unit vector")
        if self.kind is WavePart.S and self.j not in (0, 1, 2):
            raise ContractViolation("shear incidence needs a polarization index j in {0,1,2}")

    @property
    def direction(self) -> np.ndarray:
        return np.asarray(self.d, dtype=float)

    def polarization(self) -> np.ndarray:
        d = self.direction
        if self.kind is WavePart.P:
            return d
        e = np.zeros(3)
        e[self.j] = 1.0
        return e - d[self.j] * d

    def eval(self, x: np.ndarray, medium: ElasticMedium):
        return incident_eval(self, x, medium)


def incident_eval(wave: PlaneWave, x: np.ndarray, medium: ElasticMedium):
    """Value, Jacobian, divergence and curl of a plane incident wave.

    Broadcasts over leading axes of ``x``.  For pressure incidence the curl
    vanishes and ``div = i*k_p*exp(i*k_p*d.x)``; for shear the divergence
    vanishes identically.
    """
    x = np.asarray(x, dtype=float)
    d = wave.direction
    q = wave.polarization()
    k = medium.wavenumber(wave.kind)
    phase = np.exp(1j * k * (x @ d))
    value = phase[..., None] * q
    jac = 1j * k * phase[..., None, None] * np.multiply.outer(q, d)
    if wave.kind is WavePart.P:
        div = 1j * k * phase
        curl = np.zeros_like(value)
    else:
        div = np.zeros_like(phase)
        curl = 1j * k * phase[..., None] * np.cross(d, q)
    return value, jac, div, curl


@dataclass(frozen=True)
class PhiColumnIncident:
    """Column ``j`` of the P- or S-part of the fundamental tensor anchored at
    ``y``; the incident field used by the near-field indicator oracle."""

    y: tuple[float, float, float]
    part: WavePart
    j: int

    def eval(self, x: np.ndarray, medium: ElasticMedium):
        from .greens import phi_part, phi_part_grad

        y = np.asarray(self.y, dtype=float)
        value = phi_part(x, y, self.part, medium)[..., :, self.j]
        jac = phi_part_grad(x, y, self.part, self.j, medium)
        div = np.trace(jac, axis1=-2, axis2=-1)
        curl = np.stack(
            [
                jac[..., 2, 1] - jac[..., 1, 2],
                jac[..., 0, 2] - jac[..., 2, 0],
                jac[..., 1, 0] - jac[..., 0, 1],
            ],
            axis=-1,
        )
        return value, jac, div, curl


@dataclass
class MFSSolution:
    """Source strengths for one incident field plus the residual certificate."""

    sources: np.ndarray  # (n_src, 3)
    coefficients: np.ndarray  # (n_src, 3) complex
    boundary_residual: float
    truncated_rank: int

    def __post_init__(self) -> None:
        self.sources = np.asarray(self.sources, dtype=float)
        self.coefficients = np.asarray(self.coefficients, dtype=complex)


@dataclass(frozen=True)
class MFSConfig:
    """Discretization of the forward solver.

    ``sources = collocation counts // 2`` in each direction keeps the system
    4x overdetermined; contraction 0.7 balances conditioning against
    representational reach.
    """

    collocation: tuple[int, int] = (24, 48)
    sources: tuple[int, int] | None = None
    contraction: float = 0.7
    svd_rcond: float = 1e-12
    residual_limit: float | None = None

    def source_counts(self) -> tuple[int, int]:
        if self.sources is not None:
            return self.sources
        return (self.collocation[0] // 2, self.collocation[1] // 2)


def _column_tractions(
    x: np.ndarray,
    nu: np.ndarray,
    z: np.ndarray,
    medium: ElasticMedium,
) -> np.ndarray:
    """Traction blocks of all tensor columns at collocation points.

    ``x`` and ``nu``: (m, 3); ``z``: (k, 3).  Returns (m, k, 3, 3) with entry
    ``[m, k, i, c]`` the i-th traction component at ``x_m`` of column ``c`` of
    ``Phi(., z_k)``.  Uses the scalar amplitude functions only; the rank-3
    derivative tensors are contracted analytically, never materialized.
    """
    lam, mu = medium.lambda0, medium.mu0
    k2 = medium.kappa**2
    ks2, kp2 = medium.kappa_s**2, medium.kappa_p**2
    sep, r = _separation(x[:, None, :], z[None, :, :])
    c1_p, _, _, a3_p, b3_p = _radial_coeffs(medium.kappa_p, r)
    c1_s, _, _, a3_s, b3_s = _radial_coeffs(medium.kappa_s, r)
    da3 = a3_s - a3_p
    db3 = b3_s - b3_p

    znu = np.einsum("mkc,mc->mk", sep, nu)
    eye = np.eye(3)
    z_nu = sep[:, :, :, None] * nu[:, None, None, :]  # z_i nu_c
    nu_z = nu[:, None, :, None] * sep[:, :, None, :]  # nu_i z_c
    zz = sep[:, :, :, None] * sep[:, :, None, :]

    div_col = (kp2 / k2) * c1_p[:, :, None] * sep  # divergence of column c
    sym = (
        (ks2 / k2) * c1_s[:, :, None, None] * (eye * znu[:, :, None, None] + z_nu)
        + (2.0 / k2)
        * (
            da3[:, :, None, None] * zz * znu[:, :, None, None]
            + db3[:, :, None, None] * (eye * znu[:, :, None, None] + z_nu + nu_z)
        )
    )
    return lam * nu[:, None, :, None] * div_col[:, :, None, :] + mu * sym


class MFSOperator:
    """Weighted collocation matrix with a reusable truncated-SVD factorization.

    The matrix maps stacked source strengths (k*3) to stacked traction
    residuals at collocation nodes (m*3), rows scaled by sqrt(area weight) so
    least squares minimizes the discrete L2 boundary misfit.
    """

    def __init__(
        self,
        surface: SurfaceMesh,
        sources: np.ndarray,
        medium: ElasticMedium,
        svd_rcond: float = 1e-12,
    ):
        self.surface = surface
        self.sources = np.asarray(sources, dtype=float)
        self.medium = medium
        self.svd_rcond = svd_rcond
        m, k = len(surface), len(self.sources)
        if 3 * m < 2 * (3 * k):
            raise ContractViolation(
                f"need at least twice as many collocation rows as unknowns, got {3 * m} rows for {3 * k} unknowns"
            )
        self._sqrt_w = np.sqrt(surface.weights)
        matrix = np.empty((3 * m, 3 * k), dtype=complex)
        chunk = max(1, 2_000_000 // max(k, 1))
        for i0 in range(0, m, chunk):
            i1 = min(i0 + chunk, m)
            blocks = _column_tractions(
                surface.nodes[i0:i1], surface.normals[i0:i1], self.sources, medium
            )
            blocks *= self._sqrt_w[i0:i1, None, None, None]
            matrix[3 * i0 : 3 * i1] = blocks.transpose(0, 2, 1, 3).reshape(3 * (i1 - i0), 3 * k)
        self._u, self._s, self._vh = scipy.linalg.svd(
            matrix, full_matrices=False, overwrite_a=True, lapack_driver="gesdd"
        )
        keep = self._s >= self.svd_rcond * self._s[0]
        self.rank = int(np.sum(keep))
        self._inv_s = np.where(keep, 1.0 / np.where(keep, self._s, 1.0), 0.0)

    @property
    def n_sources(self) -> int:
        return len(self.sources)

    def solve_weighted(self, b_weighted: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Least-squares solve for stacked right-hand sides (3m, n_rhs).

        Returns coefficients (3k, n_rhs) and relative residuals (n_rhs,).
        """
        b = np.asarray(b_weighted, dtype=complex)
        single = b.ndim == 1
        if single:
            b = b[:, None]
        bt = self._u.conj().T @ b
        coef = self._vh.conj().T @ (self._inv_s[:, None] * bt)
        norm_b = np.linalg.norm(b, axis=0)
        kept = bt[self._inv_s > 0]
        misfit_sq = np.maximum(norm_b**2 - np.linalg.norm(kept, axis=0) ** 2, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            residual = np.where(norm_b > 0, np.sqrt(misfit_sq) / norm_b, 0.0)
        if single:
            return coef[:, 0], residual[0]
        return coef, residual

    def incident_rhs(self, incident) -> np.ndarray:
        """Weighted right-hand side ``-sqrt(w) * traction(u_inc)`` stacked."""
        from .greens import traction

        value, jac, div, curl = incident.eval(self.surface.nodes, self.medium)
        t = traction(jac, div, curl, self.surface.normals, self.medium.lambda0, self.medium.mu0)
        return (-t * self._sqrt_w[:, None]).reshape(-1)

    def solve_incident(self, incident) -> MFSSolution:
        rhs = self.incident_rhs(incident)
        coef, residual = self.solve_weighted(rhs)
        return MFSSolution(
            sources=self.sources,
            coefficients=coef.reshape(-1, 3),
            boundary_residual=float(residual),
            truncated_rank=self.rank,
        )


def mfs_solve(
    surface: SurfaceMesh,
    sources: np.ndarray,
    incident,
    medium: ElasticMedium,
    operator: MFSOperator | None = None,
    svd_rcond: float = 1e-12,
) -> MFSSolution:
    """Solve the traction-free scattering problem for one incident field.

    Pass a prebuilt ``operator`` to amortize the factorization across many
    incident fields on the same surface.
    """
    if operator is None:
        operator = MFSOperator(surface, sources, medium, svd_rcond=svd_rcond)
    return operator.solve_incident(incident)


def scattered_eval(
    solution: MFSSolution, x: np.ndarray, medium: ElasticMedium
) -> tuple[np.ndarray, np.ndarray]:
    """Scattered field value and Jacobian of an MFS representation.

    ``x``: (..., 3), at least 1e-6 away from every source point.  Returns
    (value (..., 3), jacobian (..., 3, 3)).
    """
    x = np.asarray(x, dtype=float)
    out_shape = x.shape[:-1]
    flat = x.reshape(-1, 3)
    z_src = solution.sources
    coef = solution.coefficients
    k2 = medium.kappa**2
    ks2, kp2 = medium.kappa_s**2, medium.kappa_p**2

    value = np.zeros((len(flat), 3), dtype=complex)
    jac = np.zeros((len(flat), 3, 3), dtype=complex)
    chunk = max(1, 1_000_000 // max(len(z_src), 1))
    for i0 in range(0, len(flat), chunk):
        i1 = min(i0 + chunk, len(flat))
        sep, r = _separation(flat[i0:i1, None, :], z_src[None, :, :])
        if float(r.min()) < 1e-6:
            raise SingularEvaluationError(float(r.min()))
        c1_p, a2_p, b2_p, a3_p, b3_p = _radial_coeffs(medium.kappa_p, r)
        c1_s, a2_s, b2_s, a3_s, b3_s = _radial_coeffs(medium.kappa_s, r)
        da2, db2 = a2_s - a2_p, b2_s - b2_p
        da3, db3 = a3_s - a3_p, b3_s - b3_p
        gs = np.exp(1j * medium.kappa_s * r) / (4 * np.pi * r)
        zc = np.einsum("xkc,kc->xk", sep, coef)
        value[i0:i1] = (
            np.einsum("xk,kl->xl", (ks2 / k2) * gs + db2 / k2, coef)
            + np.einsum("xk,xkl->xl", da2 * zc / k2, sep)
        )
        # J[l,m] = sum_k (ks^2/k^2) c1_s z_m coef_l + (1/k2)[da3 (z.c) z_l z_m
        #          + db3 (coef_l z_m + delta_lm (z.c) + z_l coef_m)]
        jac_blk = np.einsum("xk,kl,xkm->xlm", (ks2 / k2) * c1_s + db3 / k2, coef, sep)
        jac_blk += np.einsum("xk,xkl,xkm->xlm", da3 * zc / k2, sep, sep)
        jac_blk += np.einsum("xk,xkl,km->xlm", db3 / k2, sep, coef)
        jac_blk += np.einsum("xk,lm->xlm", db3 * zc / k2, np.eye(3))
        jac[i0:i1] = jac_blk
    return value.reshape(out_shape + (3,)), jac.reshape(out_shape + (3, 3))


def point_source_farfield(
    z: np.ndarray, part: WavePart, xhat: np.ndarray, medium: ElasticMedium
) -> np.ndarray:
    """Far-field amplitude tensor of ``Phi(., z)`` in direction ``xhat``.

    Broadcasts over leading axes of ``xhat`` and ``z``; returns (..., 3, 3).
    The P amplitude is a rank-one projector along ``xhat`` (normal to the
    sphere), the S amplitude the complementary tangential projector.
    """
    xhat = np.asarray(xhat, dtype=float)
    z = np.asarray(z, dtype=float)
    k2 = medium.kappa**2
    kt = medium.wavenumber(part)
    phase = np.exp(-1j * kt * np.sum(xhat * z, axis=-1))
    proj = xhat[..., :, None] * xhat[..., None, :]
    if part is WavePart.P:
        amp = (medium.kappa_p**2 / (4 * np.pi * k2)) * proj
    else:
        amp = (medium.kappa_s**2 / (4 * np.pi * k2)) * (np.eye(3) - proj)
    return phase[..., None, None] * amp


@dataclass(eq=False)
class FarFieldMatrix:
    """Sampled far-field blocks for plane P and S incidence.

    ``upp``/``usp``: shape (n_d, n_x, 3) — P and S far-field parts for
    pressure incidence.  ``ups``/``uss``: shape (3, n_d, n_x, 3) — the same
    for the three shear polarizations (the family is linearly dependent but
    stored in full because the indicator formulas sum over it).
    """

    medium: ElasticMedium
    d_grid: DirectionGrid
    xhat_grid: DirectionGrid
    upp: np.ndarray
    usp: np.ndarray
    ups: np.ndarray
    uss: np.ndarray
    provenance: dict = field(default_factory=dict)

    def block(self, name: str) -> np.ndarray:
        return getattr(self, name)

    def check_polarization(self, tol: float = 1e-8):
        """Indices where P parts fail to be parallel / S parts tangential."""
        xh = self.xhat_grid.nodes
        bad: dict[str, np.ndarray] = {}
        for name in ("upp", "ups"):
            blk = getattr(self, name)
            radial = np.einsum("...xc,xc->...x", blk, xh)[..., None] * xh
            err = np.linalg.norm(blk - radial, axis=-1)
            scale = max(np.abs(blk).max(), 1e-300)
            idx = np.argwhere(err > tol * scale)
            if len(idx):
                bad[name] = idx
        for name in ("usp", "uss"):
            blk = getattr(self, name)
            err = np.abs(np.einsum("...xc,xc->...x", blk, xh))
            scale = max(np.abs(blk).max(), 1e-300)
            idx = np.argwhere(err > tol * scale)
            if len(idx):
                bad[name] = idx
        return bad


def _plane_wave_rhs(
    surface: SurfaceMesh, medium: ElasticMedium, d_grid: DirectionGrid
) -> np.ndarray:
    """Weighted tractions of all plane incidences, shape (3m, 4*n_d).

    Column order: [P(d_0..d_n), S_0(d_0..), S_1(d_0..), S_2(d_0..)].
    """
    x, nu, w = surface.nodes, surface.normals, surface.weights
    d = d_grid.nodes
    n_d, m = len(d), len(x)
    lam, mu = medium.lambda0, medium.mu0
    kp, ks = medium.kappa_p, medium.kappa_s
    sqrt_w = np.sqrt(w)

    rhs = np.empty((3 * m, 4 * n_d), dtype=complex)
    phase_p = np.exp(1j * kp * (x @ d.T))  # (m, n_d)
    d_nu = nu @ d.T  # (m, n_d)
    # traction of P incidence: i*kp*e^{...} [2 mu (d.nu) d + lam nu]
    t_p = 1j * kp * phase_p[:, :, None] * (
        2 * mu * d_nu[:, :, None] * d[None, :, :] + lam * nu[:, None, :]
    )
    rhs[:, :n_d] = (-t_p * sqrt_w[:, None, None]).transpose(0, 2, 1).reshape(3 * m, n_d)
    phase_s = np.exp(1j * ks * (x @ d.T))
    for j in range(3):
        q = -d[:, j : j + 1] * d
        q[:, j] += 1.0  # e_j - d_j d
        q_nu = nu @ q.T
        t_s = 1j * ks * mu * phase_s[:, :, None] * (
            d_nu[:, :, None] * q[None, :, :] + q_nu[:, :, None] * d[None, :, :]
        )
        rhs[:, (1 + j) * n_d : (2 + j) * n_d] = (
            (-t_s * sqrt_w[:, None, None]).transpose(0, 2, 1).reshape(3 * m, n_d)
        )
    return rhs


def assemble_farfield(
    surface: SurfaceMesh,
    medium: ElasticMedium,
    d_grid: DirectionGrid,
    xhat_grid: DirectionGrid,
    config: MFSConfig = MFSConfig(),
    operator: MFSOperator | None = None,
) -> FarFieldMatrix:
    """Solve all plane incidences over ``d_grid`` and sample far fields.

    The collocation factorization is shared across the 4*n_d right-hand
    sides.  P far-field samples are parallel to the observation direction and
    S samples tangential by construction of the amplitude tensors.
    """
    from .geometry import mfs_sources

    if operator is None:
        coll = surface.with_resolution(*config.collocation) if (
            (surface.n_u, surface.n_v) != tuple(config.collocation)
        ) else surface
        n_su, n_sv = config.source_counts()
        src = mfs_sources(coll.with_resolution(n_su, n_sv), config.contraction)
        operator = MFSOperator(coll, src, medium, svd_rcond=config.svd_rcond)

    rhs = _plane_wave_rhs(operator.surface, medium, d_grid)
    coef, residuals = operator.solve_weighted(rhs)
    if config.residual_limit is not None:
        bad = np.nonzero(residuals > config.residual_limit)[0]
        if len(bad):
            dirs = sorted({int(b % len(d_grid)) for b in bad})
            raise AssemblyError(
                f"{len(bad)} solves exceeded the residual limit {config.residual_limit:.1e} "
                f"(worst {residuals.max():.2e}); offending direction indices {dirs[:20]}",
                dirs,
            )

    n_d, n_x = len(d_grid), len(xhat_grid)
    k2 = medium.kappa**2
    z_src = operator.sources
    coef = coef.reshape(len(z_src), 3, 4 * n_d)
    xh = xhat_grid.nodes

    def far_blocks(part: WavePart) -> np.ndarray:
        kt = medium.wavenumber(part)
        phase = np.exp(-1j * kt * (xh @ z_src.T))  # (n_x, n_src)
        s = np.einsum("xk,kcr->xcr", phase, coef)  # (n_x, 3, 4 n_d)
        radial = np.einsum("xc,xcr->xr", xh, s)
        if part is WavePart.P:
            amp = (medium.kappa_p**2 / (4 * np.pi * k2)) * xh[:, :, None] * radial[:, None, :]
        else:
            amp = (medium.kappa_s**2 / (4 * np.pi * k2)) * (s - xh[:, :, None] * radial[:, None, :])
        # (n_x, 3, 4 n_d) -> (4, n_d, n_x, 3)
        return amp.transpose(2, 0, 1).reshape(4, n_d, n_x, 3)

    fp = far_blocks(WavePart.P)
    fs = far_blocks(WavePart.S)
    provenance = {
        "surface": {"kind": operator.surface.kind, "params": list(operator.surface.params),
                    "n_u": operator.surface.n_u, "n_v": operator.surface.n_v},
        "n_sources": int(operator.n_sources),
        "svd_rcond": operator.svd_rcond,
        "rank": operator.rank,
        "max_residual": float(residuals.max()),
        "contraction": config.contraction,
    }
    return FarFieldMatrix(
        medium=medium,
        d_grid=d_grid,
        xhat_grid=xhat_grid,
        upp=fp[0],
        usp=fs[0],
        ups=fp[1:],
        uss=fs[1:],
        provenance=provenance,
    )


def add_noise(F: FarFieldMatrix, rel: float, seed: int) -> FarFieldMatrix:
    """Componentwise complex Gaussian noise scaled to ``rel`` times the RMS
    of each block; the seed is recorded in the provenance."""
    if rel < 0:
        raise ContractViolation("noise level must be nonnegative")
    rng = np.random.default_rng(seed)
    blocks = {}
    for name in ("upp", "usp", "ups", "uss"):
        blk = getattr(F, name)
        rms = np.sqrt(np.mean(np.abs(blk) ** 2))
        noise = rng.standard_normal(blk.shape) + 1j * rng.standard_normal(blk.shape)
        blocks[name] = blk + rel * rms * noise / np.sqrt(2.0)
    provenance = dict(F.provenance)
    provenance["noise"] = {"rel": rel, "seed": seed}
    return FarFieldMatrix(
        medium=F.medium, d_grid=F.d_grid, xhat_grid=F.xhat_grid,
        provenance=provenance, **blocks,
    )
