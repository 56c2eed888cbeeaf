"""Needle scans that locate the scatterer boundary from indicator blow-up.

Probe points march inward from the boundary of an a-priori region Omega.
For every probe point an approximation domain B is built (a centered ball
that excludes the point, or in validation mode the true scatterer inflated
toward the point), densities are fit, and the indicator is evaluated; the
first point whose magnitude exceeds a shell-calibrated threshold is recorded
as a boundary point.  The threshold is relative because the constants in the
blow-up estimate are not computable; its scale factor 10**q is a
configuration parameter.

Everything is deterministic: fixed quadratures, fixed SVD cutoffs, no
randomized algorithms, so identical configuration and data reproduce
bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .forward import FarFieldMatrix
from .geometry import make_surface, surface_distance
from .herglotz import (
    ApproximationDomain,
    DensitySequence,
    HerglotzSystem,
    TikhonovSchedule,
    bessel_degenerate_degrees,
)
from .indicator import IndicatorKind, IndicatorSample, indicator_farfield
from .medium import ContractViolation, ElasticMedium, WavePart


@dataclass(frozen=True)
class BPolicy:
    """How the approximation domain follows the probe point.

    ``centered_ball``: B is the sphere about Omega's center of radius
    ``max(r_min, |y - center| - clearance)``, the largest centered ball
    keeping clearance to the probe point.  ``validation``: B is the true
    scatterer inflated by ``min(offset, gap_fraction * d(y, true boundary))``
    so the probe point always stays strictly outside; this isolates blow-up
    measurements from the ball policy.
    """

    mode: str = "centered_ball"
    clearance: float = 0.1
    r_min: float = 0.3
    offset: float = 0.05
    gap_fraction: float = 0.5
    validation_surface: tuple[str, tuple] | None = None
    mesh: tuple[int, int] = (24, 48)
    eigenvalue_guard: bool = True


@dataclass(frozen=True)
class ProbeConfig:
    """Scan definition: region, needles, stepping, indicator and policies."""

    omega_center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    omega_radius: float = 3.0
    needles: tuple = ()  # ((entry xyz, inward unit direction xyz), ...)
    step: float = 0.05
    max_depth: float = 2.5
    kind: IndicatorKind = IndicatorKind.PP
    threshold_q: float = 2.0
    shell_min_samples: int = 20
    b_policy: BPolicy = BPolicy()
    schedule: TikhonovSchedule = TikhonovSchedule()

    def __post_init__(self) -> None:
        if not self.step > 0:
            raise ContractViolation("step must be positive")
        for entry, direction in self.needles:
            e = np.asarray(entry, dtype=float) - np.asarray(self.omega_center, dtype=float)
            if abs(np.linalg.norm(e) - self.omega_radius) > 1e-9:
                raise ContractViolation("needle entries must lie on the boundary of Omega")
            if abs(np.linalg.norm(np.asarray(direction)) - 1.0) > 1e-12:
                raise ContractViolation("needle directions must be unit vectors")


def default_needles(center=(0.0, 0.0, 0.0), radius: float = 3.0) -> tuple:
    """The 26 face/edge/corner needles of the cube direction set, each
    entering on the Omega sphere and pointing at its center."""
    center = np.asarray(center, dtype=float)
    dirs = []
    for ix in (-1, 0, 1):
        for iy in (-1, 0, 1):
            for iz in (-1, 0, 1):
                if ix == iy == iz == 0:
                    continue
                dirs.append(np.array([ix, iy, iz], dtype=float))
    needles = []
    for u in dirs:
        u = u / np.linalg.norm(u)
        entry = center + radius * u
        needles.append((tuple(entry), tuple(-u)))
    return tuple(needles)


@dataclass
class NeedleResult:
    needle_id: int
    entry: np.ndarray
    direction: np.ndarray
    samples: list[IndicatorSample]
    detected: np.ndarray | None
    exponent: tuple[float, float] | None  # (slope, r2) diagnostic


@dataclass
class IndicatorField:
    """Scan output: ordered samples per needle, detections, diagnostics."""

    kind: IndicatorKind
    needles: list[NeedleResult]
    threshold: float
    shell_stats: dict
    config: ProbeConfig

    @property
    def detected_points(self) -> np.ndarray:
        pts = [n.detected for n in self.needles if n.detected is not None]
        return np.array(pts) if pts else np.zeros((0, 3))

    @property
    def misses(self) -> list[int]:
        return [n.needle_id for n in self.needles if n.detected is None]

    @property
    def all_samples(self) -> list[tuple[int, float, IndicatorSample]]:
        out = []
        for n in self.needles:
            for i, s in enumerate(n.samples):
                depth = float(np.linalg.norm(np.asarray(s.y) - n.entry))
                out.append((n.needle_id, depth, s))
        return out


def calibrate_threshold(shell_magnitudes, q: float = 2.0) -> tuple[float, dict]:
    """Detection threshold ``median(|I|) * 10**q`` from outer-shell samples."""
    mags = np.asarray(list(shell_magnitudes), dtype=float)
    if mags.size < 20:
        raise ContractViolation(f"threshold calibration needs at least 20 shell samples, got {mags.size}")
    med = float(np.median(mags))
    stats = {
        "median": med,
        "min": float(mags.min()),
        "max": float(mags.max()),
        "n": int(mags.size),
        "q": float(q),
    }
    return med * 10.0**q, stats


def blowup_exponent_fit(distances, magnitudes) -> tuple[float, float]:
    """Least-squares slope and r^2 of log|I| against log d."""
    d = np.asarray(list(distances), dtype=float)
    m = np.asarray(list(magnitudes), dtype=float)
    if d.size < 5:
        raise ContractViolation(f"exponent fit needs at least 5 samples, got {d.size}")
    if not (np.all(d > 0) and np.all(m > 0)):
        raise ContractViolation("exponent fit needs positive distances and magnitudes")
    if d.max() / d.min() < 1.5:
        raise ContractViolation("exponent fit needs distances spread over at least a factor 1.5")
    x, y = np.log(d), np.log(m)
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


class _DomainBuilder:
    """Builds per-point approximation domains and caches their SVD systems."""

    def __init__(self, policy: BPolicy, omega_center, medium: ElasticMedium, grid):
        self.policy = policy
        self.center = np.asarray(omega_center, dtype=float)
        self.medium = medium
        self.grid = grid
        self._systems: dict = {}

    def _guarded_radius(self, radius: float) -> float:
        if not self.policy.eigenvalue_guard:
            return radius
        l_max = 2 * self.grid.n_theta
        for _ in range(8):
            if not bessel_degenerate_degrees(radius, self.medium, l_max):
                return radius
            radius *= 1.01
        return radius

    def domain_for(self, y: np.ndarray) -> ApproximationDomain:
        pol = self.policy
        n_u, n_v = pol.mesh
        if pol.mode == "validation":
            if pol.validation_surface is None:
                raise ContractViolation("validation B-policy needs the true surface")
            kind, params = pol.validation_surface
            gap = float(surface_distance(kind, params, np.asarray(y, dtype=float)[None])[0])
            offset = min(pol.offset, pol.gap_fraction * gap)
            boundary = make_surface(kind, tuple(p + offset for p in params), n_u, n_v)
            return ApproximationDomain(boundary=boundary, contains_scatterer=True, excluded_point=tuple(y))
        if pol.mode != "centered_ball":
            raise ContractViolation(f"unknown B policy mode {pol.mode!r}")
        radius = max(pol.r_min, float(np.linalg.norm(np.asarray(y) - self.center)) - pol.clearance)
        radius = self._guarded_radius(radius)
        boundary = make_surface("sphere", radius, n_u, n_v, center=tuple(self.center))
        return ApproximationDomain(boundary=boundary, contains_scatterer=False, excluded_point=tuple(y))

    def system_for(self, domain: ApproximationDomain, part: WavePart) -> HerglotzSystem:
        b = domain.boundary
        key = (b.kind, tuple(np.round(b.params, 12)), tuple(np.round(b.center, 12)), b.n_u, b.n_v, part)
        if key not in self._systems:
            self._systems[key] = HerglotzSystem(self.grid, b, part, self.medium)
        return self._systems[key]


def _evaluate_point(
    F: FarFieldMatrix,
    builder: _DomainBuilder,
    y: np.ndarray,
    kind: IndicatorKind,
    schedule: TikhonovSchedule,
    medium: ElasticMedium,
) -> IndicatorSample:
    domain = builder.domain_for(y)
    flags: list[str] = []
    info: dict = {"b_kind": domain.boundary.kind, "b_params": list(domain.boundary.params)}
    gp = gs = None
    if kind.needs_p:
        seq = builder.system_for(domain, WavePart.P).tikhonov_path(y, schedule)
        gp = seq.selected
        info["p_residual"] = gp.residual
        info["p_stage"] = gp.stage
        if not seq.converged:
            flags.append("p_density_nonconvergent")
    if kind.needs_s:
        seq = builder.system_for(domain, WavePart.S).tikhonov_path(y, schedule)
        gs = seq.selected
        info["s_residual"] = gs.residual
        info["s_stage"] = gs.stage
        if not seq.converged:
            flags.append("s_density_nonconvergent")
    value = indicator_farfield(F, gp, gs, kind, medium)
    return IndicatorSample(
        y=np.asarray(y, dtype=float),
        kind=kind,
        value=value,
        density_info=info,
        quadrature_info={"n_theta": F.d_grid.n_theta, "n_phi": F.d_grid.n_phi},
        flags=tuple(flags),
    )


def probe_scan(F: FarFieldMatrix, cfg: ProbeConfig, medium: ElasticMedium) -> IndicatorField:
    """March every needle inward and detect first threshold crossings.

    The threshold is calibrated on the needle entry points (the outer shell
    of Omega); needles whose samples never cross it are reported as misses.
    Samples with non-convergent densities are flagged but the needle
    continues.
    """
    needles = cfg.needles if cfg.needles else default_needles(cfg.omega_center, cfg.omega_radius)
    if len(needles) < cfg.shell_min_samples:
        raise ContractViolation(
            f"need at least {cfg.shell_min_samples} needles for shell calibration, got {len(needles)}"
        )
    builder = _DomainBuilder(cfg.b_policy, cfg.omega_center, medium, F.d_grid)

    shell_samples = []
    for entry, _ in needles:
        shell_samples.append(_evaluate_point(F, builder, np.asarray(entry), cfg.kind, cfg.schedule, medium))
    threshold, stats = calibrate_threshold([s.magnitude for s in shell_samples], cfg.threshold_q)

    results = []
    n_steps = int(np.floor(cfg.max_depth / cfg.step))
    for idx, (entry, direction) in enumerate(needles):
        entry = np.asarray(entry, dtype=float)
        direction = np.asarray(direction, dtype=float)
        samples = [shell_samples[idx]]
        detected = None
        for k in range(1, n_steps + 1):
            y = entry + k * cfg.step * direction
            sample = _evaluate_point(F, builder, y, cfg.kind, cfg.schedule, medium)
            samples.append(sample)
            if sample.magnitude >= threshold and not sample.flags:
                detected = y
                break
        exponent = None
        if detected is not None:
            tail = [s for s in samples[:-1] if s.magnitude > 0][-8:]
            dists = [float(np.linalg.norm(s.y - detected)) for s in tail]
            mags = [s.magnitude for s in tail]
            try:
                exponent = blowup_exponent_fit(dists, mags)
            except ContractViolation:
                exponent = None
        results.append(
            NeedleResult(
                needle_id=idx, entry=entry, direction=direction,
                samples=samples, detected=detected, exponent=exponent,
            )
        )
    return IndicatorField(kind=cfg.kind, needles=results, threshold=threshold, shell_stats=stats, config=cfg)
