"""Elastic far-field synthesis and probe-method boundary reconstruction.

The package has two halves. The forward half builds synthetic data: the
Kupradze fundamental tensor and its derivatives (`greens`), sphere quadrature
and parametric scatterer surfaces (`geometry`), and a method-of-fundamental-
solutions solver that assembles far-field matrices for plane pressure and
shear incidence (`forward`). The inverse half recovers the obstacle boundary
from a single far-field block: Tikhonov-regularized Herglotz densities
(`herglotz`), the four probe indicator functions plus a near-field validation
oracle (`indicator`), and needle scans that detect the indicator blow-up
(`probe`). `dataio` and `cli` handle dataset files and the command line.
"""

from .medium import ElasticMedium, WavePart
from .geometry import DirectionGrid, SurfaceMesh, make_surface, mfs_sources, s2_quadrature
from .forward import (
    FarFieldMatrix,
    MFSConfig,
    MFSOperator,
    MFSSolution,
    PlaneWave,
    assemble_farfield,
    incident_eval,
    mfs_solve,
    point_source_farfield,
    scattered_eval,
)
from .herglotz import (
    ApproximationDomain,
    DensitySequence,
    HerglotzDensity,
    HerglotzSystem,
    TikhonovSchedule,
    herglotz_eval,
    herglotz_matrix,
    tikhonov_density,
    vector_density,
)
from .indicator import IndicatorKind, IndicatorSample, indicator_farfield, indicator_nearfield_oracle
from .probe import (
    BPolicy,
    IndicatorField,
    ProbeConfig,
    blowup_exponent_fit,
    calibrate_threshold,
    default_needles,
    probe_scan,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
