"""robinlab: diffusion across irregular membranes.

Partially reflected Brownian motion (walk-on-spheres) and finite-difference
solvers for the Robin boundary-value problem on prefractal 2D domains, with
total-flux functionals, empirical harmonic measures, and finite-scale
dimension estimates.
"""

__version__ = "0.1.0"

from .geometry import (  # noqa: F401
    DISK, QUADRATIC, SQUARE, TRIADIC,
    DomainSpec, GeometryError, Polygon, PrefractalSpec, ResourceGuardError,
    SourceSpec, build_prefractal, default_source, domain_from_json,
    domain_to_json, load_domain, make_domain, save_domain,
    similarity_dimension,
)
from .walk import (  # noqa: F401
    BatchResult, HitRecord, RngSpec, UEstimate, WalkConfig, WalkError,
    WalkOutcome, absorption_probability, default_eps, estimate_u, run_batch,
    run_walk, sample_measure,
)
from .fd import (  # noqa: F401
    ConservationError, ConvergenceError, FDError, FluxProfile, Grid,
    NonGridAlignedError, ScalarField, SolverConfig, flux_profile, flux_total,
    rasterize, solve_green, solve_robin, source_flux,
)
from .measure import (  # noqa: F401
    EmpiricalMeasure, MeasureError, MomentSpectrum, ScalingFit,
    ambient_information_dimension, arc_to_ambient, bin_hits,
    binary_cascade_sample, cascade_d1, cascade_dq, information_dimension,
    lq_spectrum,
)
from .experiments import (  # noqa: F401
    CrossoverReport, DimensionReport, ExperimentError, SweepResult, SweepRow,
    detect_crossover, dimension_experiment, emphysema_sweep, sweep_a,
)
