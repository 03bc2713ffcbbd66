"""Numerical harness for singular integral operators on mixed radial-angular spaces."""

from .errors import (
    ConfigError,
    DimensionMismatchError,
    InvalidRangeError,
    MissingMultiplierError,
    MixsioError,
    NonCancellingKernelWarning,
    NonFiniteValueError,
    SingularInputError,
    SupportLeakageError,
    SupportLeakageWarning,
    UnsupportedDimensionError,
)
from .grid import (
    CartesianGrid,
    GridFunction,
    GridSpec,
    PolarGrid,
    build_cartesian_grid,
    build_polar_grid,
    grid_preset,
    load_grid_function,
    resample,
    sample,
    save_grid_function,
    sphere_area,
)
from .lemma import (
    LemmaParams,
    SplitReport,
    apply_F,
    g_profile,
    sphere_kernel_closed_form,
    sphere_kernel_integral,
    stein_weiss_kernel,
    verify_commutator_identity,
    young_bound_constant,
)
from .norms import NormParams, angular_norm, conjugate, lp_norm, mixed_norm, norm_scaling_check, weighted_mixed_norm
from .sio import (
    KernelReport,
    KernelSpec,
    apply_pv_direct,
    apply_spectral,
    check_kernel_conditions,
    kernel_by_label,
    power_kernel,
    riesz,
    riesz_constant,
    spectral_eval,
)
from .sweep import (
    BlowupFit,
    RatioReport,
    RatioRow,
    SweepConfig,
    blowup_probe,
    emit_reports,
    load_reports,
    make_test_function,
    ratio_point,
    run_sweep,
)

__version__ = "0.1.0"
