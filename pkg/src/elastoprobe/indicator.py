"""Probe indicator functions from far-field data, plus the near-field oracle.

Each indicator pairs one far-field block with Herglotz densities on both the
incidence and observation grids and sums the three tensor-column
contributions; the sum is never split because the individual columns can have
lower-order blow-up.  The dot products are bilinear with the conjugate placed
on the observation-side density factor, matching the derivation of the
boundary identity they discretize.

The observation-side sums collapse analytically:

    PP: sum_j d_j xhat_j (u . xhat)          = (d.xhat) (u.xhat)
    PS: sum_j d_j (u.e_j - xhat_j (u.xhat))  = u.d - (d.xhat)(u.xhat)
    SS: sum_j (u_j.e_j - xhat_j (u_j.xhat))
    SP: sum_j xhat_j (u_j.xhat)

with ``u`` the relevant far-field sample (indexed by j itself for shear
incidence).  The collapsed forms are algebraically identical to the
per-column expressions; ``return_parts`` exposes the per-column values for
debugging only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .forward import FarFieldMatrix, MFSConfig, MFSOperator, PhiColumnIncident, scattered_eval
from .geometry import SurfaceMesh, point_inside
from .greens import phi_part, phi_part_grad, traction_from_jacobian
from .herglotz import HerglotzDensity
from .medium import ContractViolation, ElasticMedium, WavePart


class OracleQualityError(RuntimeError):
    """The oracle's forward solve missed its residual target."""


class IndicatorKind(Enum):
    PP = "pp"
    PS = "ps"
    SS = "ss"
    SP = "sp"

    @property
    def incidence(self) -> WavePart:
        return WavePart.P if self in (IndicatorKind.PP, IndicatorKind.PS) else WavePart.S

    @property
    def observation(self) -> WavePart:
        return WavePart.P if self in (IndicatorKind.PP, IndicatorKind.SP) else WavePart.S

    @property
    def needs_p(self) -> bool:
        return self in (IndicatorKind.PP, IndicatorKind.PS, IndicatorKind.SP)

    @property
    def needs_s(self) -> bool:
        return self in (IndicatorKind.SS, IndicatorKind.PS, IndicatorKind.SP)


@dataclass
class IndicatorSample:
    """One indicator evaluation with enough metadata to reproduce it."""

    y: np.ndarray
    kind: IndicatorKind
    value: complex
    density_info: dict = field(default_factory=dict)
    quadrature_info: dict = field(default_factory=dict)
    flags: tuple[str, ...] = ()

    @property
    def magnitude(self) -> float:
        return abs(self.value)


def _prefactor(kind: IndicatorKind, medium: ElasticMedium) -> float:
    """Scaling that makes the discrete indicator equal the boundary integral
    I(v, w) of its Herglotz fields.

    The raw density-factor product is ``4*pi*k_inc^2*k_obs^2/k^4``; pairing a
    far field with a density through the radiating boundary identity brings
    in the traction modulus of the observation wave (``lambda0 + 2*mu0`` for
    P, ``mu0`` for S), and ``(lambda0+2*mu0)*k_p^2 = mu0*k_s^2 = kappa^2``
    collapses the product to ``4*pi*k_inc^2/kappa^2``.
    """
    k_inc = medium.kappa_p if kind.incidence is WavePart.P else medium.kappa_s
    return 4 * np.pi * k_inc**2 / medium.kappa**2


def _check_grids(F: FarFieldMatrix, densities: list[HerglotzDensity]) -> None:
    ref = F.d_grid
    if len(F.xhat_grid) != len(ref) or not np.array_equal(F.xhat_grid.nodes, ref.nodes):
        raise ContractViolation("indicator evaluation needs identical incidence and observation grids")
    for g in densities:
        if g is None:
            continue
        if len(g.grid) != len(ref) or not np.array_equal(g.grid.nodes, ref.nodes):
            raise ContractViolation("density grid does not match the far-field grids")


def indicator_farfield(
    F: FarFieldMatrix,
    gp: HerglotzDensity | None,
    gs: HerglotzDensity | None,
    kind: IndicatorKind,
    medium: ElasticMedium,
    return_parts: bool = False,
):
    """Discrete double quadrature of one indicator over d x xhat.

    PP needs only the pressure density, SS only the shear one; the mixed
    kinds pair the incidence-side density with the other wave's density on
    the observation side.
    """
    if kind.needs_p and gp is None:
        raise ContractViolation(f"{kind.value} requires a pressure density")
    if kind.needs_s and gs is None:
        raise ContractViolation(f"{kind.value} requires a shear density")
    _check_grids(F, [gp, gs])

    d = F.d_grid.nodes
    xh = F.xhat_grid.nodes
    w_d = F.d_grid.weights
    w_x = F.xhat_grid.weights
    pref = _prefactor(kind, medium)
    dot_dx = d @ xh.T  # (n_d, n_x)

    kern_j = None
    if kind is IndicatorKind.PP:
        left = w_d * gp.values
        right = w_x * np.conj(gp.values)
        u_dot_x = np.einsum("kmc,mc->km", F.upp, xh)
        kern = u_dot_x * dot_dx
        if return_parts:
            kern_j = u_dot_x[None] * (d.T[:, :, None] * xh.T[:, None, :])
    elif kind is IndicatorKind.PS:
        left = w_d * gp.values
        right = w_x * np.conj(gs.values)
        u_dot_d = np.einsum("kmc,kc->km", F.usp, d)
        u_dot_x = np.einsum("kmc,mc->km", F.usp, xh)
        kern = u_dot_d - dot_dx * u_dot_x
        if return_parts:
            kern_j = F.usp.transpose(2, 0, 1) * d.T[:, :, None] - u_dot_x[None] * (
                d.T[:, :, None] * xh.T[:, None, :]
            )
    elif kind is IndicatorKind.SS:
        left = w_d * gs.values
        right = w_x * np.conj(gs.values)
        diag = np.stack([F.uss[j, :, :, j] for j in range(3)])
        u_dot_x = np.einsum("jkmc,mc->jkm", F.uss, xh)
        kern_j = diag - u_dot_x * xh.T[:, None, :]
        kern = kern_j.sum(axis=0)
    else:  # SP
        left = w_d * gs.values
        right = w_x * np.conj(gp.values)
        u_dot_x = np.einsum("jkmc,mc->jkm", F.ups, xh)
        kern_j = u_dot_x * xh.T[:, None, :]
        kern = kern_j.sum(axis=0)

    if return_parts:
        return pref * np.einsum("k,jkm,m->j", left, kern_j, right)
    return complex(pref * (left @ kern @ right))


_ORACLE_PAIRS = {
    IndicatorKind.PP: (WavePart.P, WavePart.P),
    IndicatorKind.PS: (WavePart.P, WavePart.S),
    IndicatorKind.SS: (WavePart.S, WavePart.S),
    IndicatorKind.SP: (WavePart.S, WavePart.P),
}


def oracle_operator(
    surface: SurfaceMesh,
    medium: ElasticMedium,
    probe_direction: np.ndarray,
    d_min: float = 0.15,
    collocation: tuple[int, int] = (48, 96),
    base_sources: tuple[int, int] = (16, 32),
    contraction: float = 0.6,
    svd_rcond: float = 1e-12,
) -> MFSOperator:
    """Forward operator tuned for probe sources approaching along one ray.

    A unit point tensor at ``y = (1+d) * yhat`` scatters off the unit sphere
    with an image singularity near radius ``1/(1+d)``; a concentric source
    layer cannot reach it for small ``d``.  This operator augments the base
    layer with small source clusters along the probe ray that enclose the
    image points down to ``d_min``, and refines the collocation with a
    graded polar cap so the least squares actually sees the boundary peak.
    Only spheres are supported (validation-mode geometry).
    """
    from .geometry import composite_mesh, make_surface, mfs_sources, polar_cap_nodes

    if surface.kind != "sphere":
        raise ContractViolation("the ray-adapted oracle operator supports spheres only")
    radius = surface.params[0]
    yhat = np.asarray(probe_direction, dtype=float)
    yhat = yhat / np.linalg.norm(yhat)

    coll = surface.with_resolution(*collocation)
    cap_nodes, cap_w = polar_cap_nodes(yhat, max(d_min / 3.0, 5e-3), 0.6, 14, radius=radius)
    coll = composite_mesh(coll, cap_nodes, cap_nodes / radius, cap_w)

    sources = [mfs_sources(surface.with_resolution(*base_sources), contraction)]
    gap = 0.45  # image depth fraction covered by each cluster
    g = 1.0 - contraction * 0.9
    while g > 0.8 * d_min / (1.0 + d_min):
        center = (1.0 - g) * radius * yhat
        rho = gap * g * radius
        cluster = make_surface("sphere", rho, 6, 12, center=tuple(center))
        sources.append(cluster.nodes)
        g *= 0.62
    return MFSOperator(coll, np.vstack(sources), medium, svd_rcond=svd_rcond)


def indicator_nearfield_oracle(
    surface: SurfaceMesh,
    medium: ElasticMedium,
    y: np.ndarray,
    kind: IndicatorKind,
    config: MFSConfig = MFSConfig(),
    operator: MFSOperator | None = None,
    residual_limit: float | None = 0.05,
    return_parts: bool = False,
    quad_mesh: SurfaceMesh | None = None,
):
    """Boundary-integral indicator with exact tensor columns as incidence.

    Validation-mode only: requires the true scatterer geometry.  For each
    column j the scattering problem is solved with the incident field
    ``Phi_v^j(., y)``; the test function is ``Phi_w^j(., y)``; the summed
    boundary integral

        I(v, w) = int_dD [ u_s(v) . conj(sigma(w) nu) - conj(w) .
                           (sigma(u_s(v)) nu) ] ds

    is accumulated over j.  Raises when y is inside the scatterer or when
    the forward residual exceeds ``residual_limit``.
    """
    y = np.asarray(y, dtype=float)
    if point_inside(surface.kind, surface.params, y):
        raise ContractViolation("oracle probe point lies inside the scatterer")
    if operator is None:
        from .geometry import mfs_sources

        coll = surface.with_resolution(*config.collocation) if (
            (surface.n_u, surface.n_v) != tuple(config.collocation)
        ) else surface
        n_su, n_sv = config.source_counts()
        src = mfs_sources(coll.with_resolution(n_su, n_sv), config.contraction)
        operator = MFSOperator(coll, src, medium, svd_rcond=config.svd_rcond)

    if quad_mesh is None:
        # The operator surface may carry extra collocation-only nodes whose
        # weights do not tile the area; integrate on a clean structured mesh.
        quad_mesh = surface.with_resolution(max(surface.n_u, 48), max(surface.n_v, 96))
    mesh = quad_mesh
    v_part, w_part = _ORACLE_PAIRS[kind]
    lam, mu = medium.lambda0, medium.mu0
    parts = []
    for j in range(3):
        sol = operator.solve_incident(PhiColumnIncident(tuple(y), v_part, j))
        if residual_limit is not None and sol.boundary_residual > residual_limit:
            raise OracleQualityError(
                f"oracle forward residual {sol.boundary_residual:.2e} exceeds {residual_limit:.1e} "
                f"for column {j} at y={y.tolist()}"
            )
        us_val, us_jac = scattered_eval(sol, mesh.nodes, medium)
        us_trac = traction_from_jacobian(us_jac, mesh.normals, lam, mu)
        w_val = phi_part(mesh.nodes, y, w_part, medium)[:, :, j]
        w_jac = phi_part_grad(mesh.nodes, y, w_part, j, medium)
        w_trac = traction_from_jacobian(w_jac, mesh.normals, lam, mu)
        integrand = np.einsum("mc,mc->m", us_val, np.conj(w_trac)) - np.einsum(
            "mc,mc->m", np.conj(w_val), us_trac
        )
        parts.append(complex(np.sum(mesh.weights * integrand)))
    if return_parts:
        return np.array(parts)
    return complex(sum(parts))
