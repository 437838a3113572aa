"""Curvature, biharmonic curves and biharmonic linear maps in the Sol and Nil geometries."""
from .charts import (
    ChartMetric, FrameField, christoffel_at, euclidean_chart, frame_at, get_chart,
    load_chart, metric_at, nil_chart, riemann_frame_at, riemann_mixed_at, sol_chart,
)
from .curves import (
    CurveTrajectory, FrenetState, biharmonic_residual_direct, biharmonic_residual_frame,
    frenet_apparatus, initial_state, integrate_frenet, integrate_helix, sol_condition_residual,
)
from .errors import (
    ArcLengthViolation, DomainExceeded, GeodesicDegenerate, InsufficientSamples,
    NonOrthonormalFrame, ParseError, SingularMetric, SolNilError, StepTooLarge, WrongChart,
)
from .maps import (
    ClassificationVerdict, LinearMap, bitension_numeric, classify, nil_residual_closed,
    sol_residual_closed, tension_linear,
)
from .report import ResidualReport
from .scan import ScanReport, helix_scan, orientation_grid

__version__ = "0.1.0"
