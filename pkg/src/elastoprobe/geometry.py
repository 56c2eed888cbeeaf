"""Unit-sphere quadrature grids and parametric scatterer surfaces."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .medium import ContractViolation

SHAPE_KINDS = ("sphere", "ellipsoid", "peanut")


@dataclass(frozen=True, eq=False)
class DirectionGrid:
    """Quadrature nodes and steradian weights on the unit sphere.

    Gauss-Legendre in the polar cosine crossed with a uniform (trapezoid)
    azimuth rule; exact for spherical harmonics up to degree
    ``min(2*n_theta - 1, n_phi - 1)``.
    """

    nodes: np.ndarray  # (n, 3) unit vectors
    weights: np.ndarray  # (n,) positive, summing to 4*pi
    n_theta: int
    n_phi: int

    def __post_init__(self) -> None:
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    def __len__(self) -> int:
        return self.nodes.shape[0]

    @property
    def size(self) -> int:
        return self.nodes.shape[0]


def s2_quadrature(n_theta: int, n_phi: int) -> DirectionGrid:
    """Product quadrature grid on the unit sphere.

    ``n_theta`` Gauss-Legendre nodes in cos(theta) carry the sin(theta)
    surface factor inside their weights; ``n_phi`` equispaced azimuths close
    the periodic direction.  Requires ``n_theta >= 4`` and
    ``n_phi >= 2*n_theta - 1`` so the azimuthal rule never limits accuracy.
    """
    if n_theta < 4:
        raise ContractViolation(f"n_theta must be at least 4, got {n_theta}")
    if n_phi < 2 * n_theta - 1:
        raise ContractViolation(f"n_phi must be at least 2*n_theta-1, got {n_phi}")
    u, w_u = np.polynomial.legendre.leggauss(n_theta)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    sin_theta = np.sqrt(1.0 - u**2)
    ct, cp = np.meshgrid(u, np.cos(phi), indexing="ij")
    st, sp = np.meshgrid(sin_theta, np.sin(phi), indexing="ij")
    nodes = np.stack([st * cp, st * sp, ct], axis=-1).reshape(-1, 3)
    weights = np.repeat(w_u * (2 * np.pi / n_phi), n_phi)
    return DirectionGrid(nodes=nodes, weights=weights, n_theta=n_theta, n_phi=n_phi)


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    """Quadrature nodes, outward unit normals and area weights on a closed
    parametric surface."""

    nodes: np.ndarray  # (n, 3)
    normals: np.ndarray  # (n, 3) unit, outward
    weights: np.ndarray  # (n,) area weights
    kind: str
    params: tuple
    n_u: int
    n_v: int
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        for arr in (self.nodes, self.normals, self.weights):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return self.nodes.shape[0]

    @property
    def area(self) -> float:
        return float(np.sum(self.weights))

    @property
    def centroid(self) -> np.ndarray:
        return np.average(self.nodes, axis=0, weights=self.weights)

    def inflate(self, offset: float) -> "SurfaceMesh":
        """Same shape family with every radius/semi-axis grown by ``offset``."""
        params = tuple(p + offset for p in self.params)
        return make_surface(self.kind, params, self.n_u, self.n_v, center=self.center)

    def with_resolution(self, n_u: int, n_v: int) -> "SurfaceMesh":
        return make_surface(self.kind, self.params, n_u, n_v, center=self.center)


def _normalize_params(kind: str, params) -> tuple:
    if np.isscalar(params):
        params = (float(params),)
    params = tuple(float(p) for p in np.atleast_1d(params))
    expected = {"sphere": 1, "ellipsoid": 3, "peanut": 2}
    if kind not in expected:
        raise ContractViolation(f"unknown surface kind {kind!r}; choose from {SHAPE_KINDS}")
    if len(params) != expected[kind]:
        raise ContractViolation(f"{kind} takes {expected[kind]} parameter(s), got {len(params)}")
    if any(p <= 0 for p in params):
        raise ContractViolation(f"{kind} parameters must be positive, got {params}")
    return params


def make_surface(kind: str, params, n_u: int, n_v: int, center=(0.0, 0.0, 0.0)) -> SurfaceMesh:
    """Build a sphere, ellipsoid or peanut mesh with analytic normals.

    The polar direction uses Gauss-Legendre nodes in cos(theta) (no points at
    the poles) and the azimuth is equispaced; area weights come from the
    parametrization's fundamental form, so ``sum(weights)`` converges
    spectrally to the true area.  The peanut is the axisymmetric star-shaped
    surface ``rho(theta) = sqrt(a^2 cos^2 theta + b^2 sin^2 theta)``.
    """
    params = _normalize_params(kind, params)
    if n_u < 4 or n_v < 4:
        raise ContractViolation("surface grids need n_u >= 4 and n_v >= 4")
    u, w_u = np.polynomial.legendre.leggauss(n_u)
    phi = 2 * np.pi * np.arange(n_v) / n_v
    ct, ph = np.meshgrid(u, phi, indexing="ij")
    st = np.sqrt(1.0 - ct**2)
    cp, sp = np.cos(ph), np.sin(ph)
    w2d = (w_u[:, None] * (2 * np.pi / n_v)).repeat(n_v, axis=1)

    if kind == "sphere":
        (a,) = params
        nodes = a * np.stack([st * cp, st * sp, ct], axis=-1)
        normals = np.stack([st * cp, st * sp, ct], axis=-1)
        jac = np.full_like(ct, a * a)
    elif kind == "ellipsoid":
        a, b, c = params
        nodes = np.stack([a * st * cp, b * st * sp, c * ct], axis=-1)
        cross = np.stack([b * c * st * cp, a * c * st * sp, a * b * ct], axis=-1)
        jac = np.linalg.norm(cross, axis=-1)
        normals = cross / jac[..., None]
    else:  # peanut
        a, b = params
        rho = np.sqrt(a * a * ct**2 + b * b * st**2)
        # d rho / d theta = (b^2 - a^2) sin cos / rho
        drho = (b * b - a * a) * st * ct / rho
        s_hat = np.stack([st * cp, st * sp, ct], axis=-1)
        t_hat = np.stack([ct * cp, ct * sp, -st], axis=-1)
        nodes = rho[..., None] * s_hat
        raw = rho[..., None] * s_hat - drho[..., None] * t_hat
        norm = np.sqrt(rho**2 + drho**2)
        normals = raw / norm[..., None]
        jac = rho * norm

    weights = (jac * w2d).reshape(-1)
    center = tuple(float(c) for c in center)
    return SurfaceMesh(
        nodes=nodes.reshape(-1, 3).astype(float) + np.asarray(center),
        normals=normals.reshape(-1, 3).astype(float),
        weights=weights.astype(float),
        kind=kind,
        params=params,
        n_u=n_u,
        n_v=n_v,
        center=center,
    )


def mfs_sources(surface: SurfaceMesh, contraction: float, max_count: int | None = None) -> np.ndarray:
    """Source points for the fundamental-solutions solver.

    Each point is ``centroid + contraction * (node - centroid)``; the
    structured (n_u, n_v) node set is stride-subsampled to at most
    ``max_count`` points when requested.
    """
    if not 0 < contraction < 1:
        raise ContractViolation(f"contraction must lie in (0, 1), got {contraction}")
    centroid = surface.centroid
    nodes = surface.nodes.reshape(surface.n_u, surface.n_v, 3)
    if max_count is not None and max_count < nodes.shape[0] * nodes.shape[1]:
        stride = int(np.ceil(np.sqrt(nodes.shape[0] * nodes.shape[1] / max_count)))
        nodes = nodes[::stride, ::stride]
    pts = nodes.reshape(-1, 3)
    return centroid + contraction * (pts - centroid)


def surface_distance(kind: str, params, points: np.ndarray, n_fine: int = 256, center=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Unsigned distance from ``points`` to the surface, via a fine sampling.

    Accurate to O(h^2) in the fine-mesh spacing, which at the default
    resolution is far below the tolerances used for reconstruction checks.
    """
    mesh = make_surface(kind, params, n_fine, 2 * n_fine, center=center)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.empty(len(pts))
    for i in range(0, len(pts), 64):
        blk = pts[i : i + 64]
        d2 = np.sum((blk[:, None, :] - mesh.nodes[None, :, :]) ** 2, axis=-1)
        out[i : i + 64] = np.sqrt(d2.min(axis=1))
    return out if points.ndim > 1 else out[0]


def polar_cap_nodes(
    direction: np.ndarray,
    theta_min: float,
    theta_max: float,
    n_rings: int,
    radius: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Geometrically graded rings of nodes in a spherical cap.

    Rings at colatitudes growing geometrically from ``theta_min`` to
    ``theta_max`` about ``direction``, each carrying points spaced like the
    local ring separation; weights are the associated ring areas.  Used to
    refine collocation near a known boundary peak, not for spectral
    quadrature.
    """
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    thetas = np.geomspace(theta_min, theta_max, n_rings)
    edges = np.zeros(n_rings + 1)
    edges[1:-1] = np.sqrt(thetas[:-1] * thetas[1:])
    edges[-1] = theta_max
    # orthonormal frame with e3 = direction
    a = np.array([1.0, 0.0, 0.0]) if abs(direction[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    t1 = np.cross(direction, a)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(direction, t1)
    nodes, weights = [], []
    for i, th in enumerate(thetas):
        dth = edges[i + 1] - edges[i]
        n_phi = max(6, int(np.ceil(2 * np.pi * np.sin(th) / max(dth, 1e-12))))
        phis = 2 * np.pi * (np.arange(n_phi) + 0.5 * (i % 2)) / n_phi
        ring = (
            np.cos(th) * direction[None, :]
            + np.sin(th) * (np.cos(phis)[:, None] * t1 + np.sin(phis)[:, None] * t2)
        )
        area = 2 * np.pi * (np.cos(edges[i]) - np.cos(edges[i + 1])) * radius**2
        nodes.append(radius * ring)
        weights.append(np.full(n_phi, area / n_phi))
    return np.concatenate(nodes), np.concatenate(weights)


def composite_mesh(base: SurfaceMesh, nodes: np.ndarray, normals: np.ndarray, weights: np.ndarray) -> SurfaceMesh:
    """Base mesh with extra weighted nodes appended (collocation use only;
    the (n_u, n_v) structure no longer tiles the node list)."""
    return SurfaceMesh(
        nodes=np.vstack([base.nodes, nodes]),
        normals=np.vstack([base.normals, normals]),
        weights=np.concatenate([base.weights, weights]),
        kind=base.kind,
        params=base.params,
        n_u=base.n_u,
        n_v=base.n_v,
        center=base.center,
    )


def point_inside(kind: str, params, points: np.ndarray, center=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Containment test; exact for these star-shaped implicit surfaces."""
    params = _normalize_params(kind, params)
    pts = np.atleast_2d(np.asarray(points, dtype=float)) - np.asarray(center, dtype=float)
    if kind == "sphere":
        inside = np.linalg.norm(pts, axis=-1) < params[0]
    elif kind == "ellipsoid":
        a, b, c = params
        inside = (pts[:, 0] / a) ** 2 + (pts[:, 1] / b) ** 2 + (pts[:, 2] / c) ** 2 < 1
    else:
        a, b = params
        r = np.linalg.norm(pts, axis=-1)
        with np.errstate(invalid="ignore"):
            ct2 = np.where(r > 0, (pts[:, 2] / np.maximum(r, 1e-300)) ** 2, 1.0)
        rho = np.sqrt(a * a * ct2 + b * b * (1 - ct2))
        inside = r < rho
    return inside if points.ndim > 1 else bool(inside[0])
