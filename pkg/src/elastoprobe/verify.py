"""Built-in analytic verification batteries behind ``elastoprobe verify``.

Each suite runs a handful of identity checks with independent oracles
(finite differences, series, quadrature closures) and prints one line per
check; the CLI exit code reflects the conjunction.
"""

from __future__ import annotations

import numpy as np

from .forward import MFSConfig, PlaneWave, assemble_farfield, point_source_farfield
from .geometry import make_surface, s2_quadrature
from .greens import green_derivs, green_scalar, phi_full, phi_part, phi_series, traction, traction_from_jacobian
from .herglotz import HerglotzSystem, TikhonovSchedule, herglotz_matrix
from .indicator import IndicatorKind, indicator_farfield
from .medium import ElasticMedium, WavePart

_MEDIUM = ElasticMedium(lambda0=1.0, mu0=1.0, kappa=1.0)


def _report(name: str, err: float, tol: float) -> bool:
    ok = err < tol
    print(f"  [{'PASS' if ok else 'FAIL'}] {name}: err={err:.3e} tol={tol:.1e}")
    return ok


def _suite_greens(tol: float | None) -> bool:
    rng = np.random.default_rng(7)
    x = rng.uniform(-2, 2, (200, 3))
    y = x + rng.uniform(0.3, 1.5, (200, 1)) * _unit(rng, 200)
    ok = True
    _, hess, _ = green_derivs(x, y, WavePart.P, _MEDIUM)
    g = green_scalar(x, y, WavePart.P, _MEDIUM)
    helm = np.abs(np.trace(hess, axis1=-2, axis2=-1) + _MEDIUM.kappa_p**2 * g) / np.abs(g)
    ok &= _report("Helmholtz residual", float(helm.max()), tol or 1e-10)
    full = phi_full(x, y, _MEDIUM)
    parts = phi_part(x, y, WavePart.P, _MEDIUM) + phi_part(x, y, WavePart.S, _MEDIUM)
    ok &= _report(
        "P+S decomposition", float(np.abs(full - parts).max() / np.abs(full).max()), tol or 1e-12
    )
    ser = phi_series(x[0], y[0], _MEDIUM, 1e-14)
    ok &= _report("series vs closed form", float(np.abs(ser - full[0]).max() / np.abs(full[0]).max()), tol or 1e-10)
    rng2 = np.random.default_rng(8)
    jac = rng2.standard_normal((50, 3, 3)) + 1j * rng2.standard_normal((50, 3, 3))
    nu = _unit(rng2, 50)
    div = np.trace(jac, axis1=-2, axis2=-1)
    curl = np.stack(
        [jac[:, 2, 1] - jac[:, 1, 2], jac[:, 0, 2] - jac[:, 2, 0], jac[:, 1, 0] - jac[:, 0, 1]], axis=-1
    )
    t1 = traction(jac, div, curl, nu, 1.3, 0.8)
    t2 = traction_from_jacobian(jac, nu, 1.3, 0.8)
    ok &= _report("traction forms agree", float(np.abs(t1 - t2).max()), tol or 1e-12)
    return ok


def _unit(rng, n):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _suite_forward(tol: float | None) -> bool:
    ok = True
    medium = _MEDIUM
    surface = make_surface("sphere", 1.0, 16, 32)
    grid = s2_quadrature(4, 8)
    F = assemble_farfield(surface, medium, grid, grid, MFSConfig(collocation=(16, 32)))
    ok &= _report("MFS residual (sphere, kappa=1)", F.provenance["max_residual"], tol or 1e-3)
    bad = F.check_polarization(1e-8)
    ok &= _report("far-field polarization", float(len(bad)), 0.5)
    z = np.array([0.2, -0.1, 0.3])
    xhat = np.array([0.0, 0.6, 0.8])
    R = 1e6
    amp = point_source_farfield(z, WavePart.P, xhat, medium)
    full = phi_full(R * xhat, z, medium)
    proj = np.outer(xhat, xhat)
    approx = R * np.exp(-1j * medium.kappa_p * R) * (proj @ full @ proj)
    ok &= _report(
        "point-source far field vs large-R",
        float(np.abs(approx - proj @ amp @ proj).max() / np.abs(amp).max()),
        tol or 1e-5,
    )
    return ok


def _suite_herglotz(tol: float | None) -> bool:
    ok = True
    medium = _MEDIUM
    grid = s2_quadrature(12, 24)
    sphere = make_surface("sphere", 1.0, 16, 32)
    h = herglotz_matrix(grid, sphere, WavePart.P, medium)
    g = np.ones(len(grid), dtype=complex)
    vals = h @ g
    kt = medium.kappa_p
    r = np.linalg.norm(sphere.nodes, axis=1)
    exact = 4 * np.pi * np.sinc(kt * r / np.pi)
    ok &= _report("plane-wave closure", float(np.abs(vals - exact).max()), tol or 1e-8)
    system = HerglotzSystem(grid, sphere, WavePart.P, medium)
    seq = system.tikhonov_path(np.array([0.0, 0.0, 3.0]), TikhonovSchedule(n_max=20))
    ok &= _report("density residual at standoff 2", seq.selected.residual, tol or 1e-2)
    return ok


def _suite_indicator(tol: float | None) -> bool:
    ok = True
    medium = _MEDIUM
    grid = s2_quadrature(6, 12)
    sphere = make_surface("sphere", 1.0, 16, 32)
    F = assemble_farfield(sphere, medium, grid, grid, MFSConfig(collocation=(16, 32)))
    zero = type(F)(
        medium=medium, d_grid=grid, xhat_grid=grid,
        upp=np.zeros_like(F.upp), usp=np.zeros_like(F.usp),
        ups=np.zeros_like(F.ups), uss=np.zeros_like(F.uss),
    )
    system_p = HerglotzSystem(grid, make_surface("sphere", 1.2, 16, 32), WavePart.P, medium)
    system_s = HerglotzSystem(grid, make_surface("sphere", 1.2, 16, 32), WavePart.S, medium)
    y = np.array([0.0, 0.0, 1.8])
    gp = system_p.tikhonov_path(y, TikhonovSchedule()).selected
    gs = system_s.tikhonov_path(y, TikhonovSchedule()).selected
    vals = [abs(indicator_farfield(zero, gp, gs, kind, medium)) for kind in IndicatorKind]
    ok &= _report("zero data gives zero indicators", float(max(vals)), 1e-30)
    v = indicator_farfield(F, gp, gs, IndicatorKind.PP, medium)
    ok &= _report("nontrivial PP indicator is finite", 0.0 if np.isfinite(v) else 1.0, 0.5)
    return ok


_SUITES = {
    "greens": _suite_greens,
    "forward": _suite_forward,
    "herglotz": _suite_herglotz,
    "indicator": _suite_indicator,
}


def run_suite(name: str, tol: float | None = None) -> bool:
    print(f"suite {name}:")
    ok = _SUITES[name](tol)
    print(f"suite {name}: {'PASS' if ok else 'FAIL'}")
    return ok
