"""waverom: frequency-domain wave-equation model reduction.

Standard and phase-preconditioned rational Krylov reduced-order models
for 1D/2D acoustic media, with two-grid construction, SVD amplitude
compression, MIMO transfer-function evaluation, and time-domain trace
synthesis.
"""

from .eikonal import TravelTimeField, load_auxiliary_times, solve_eikonal
from .helmholtz import (
    HelmholtzOperator,
    SnapshotSet,
    assemble_operator,
    compute_snapshots,
    transfer_function_direct,
)
from .model import (
    Grid,
    Scenario,
    VelocityModel,
    coarsen_model,
    load_velocity_model,
    save_velocity_model,
    smooth_model,
)
from .numerics import bessel_k, factorize, orthonormalize, solve, thin_svd
from .rom import (
    CompressedAmplitudes,
    RealBasis,
    ReducedModel,
    TransferSamples,
    assemble_pprks_basis,
    build_reduced_model,
    build_rks,
    compress_amplitudes,
    evaluate_rom,
    galerkin_solve,
    hermite_check,
    load_rom,
    save_rom,
)
from .splitting import (
    AmplitudePair,
    PhaseFamily,
    dispersion_correct,
    prolongate,
    split_field_1d,
    split_field_2d,
)
from .timedomain import TraceSet, Wavelet, synthesize_traces, wavelet_spectrum
from .verify import (
    ErrorCurve,
    LayeredModel1D,
    analytic_1d_layered,
    convergence_study,
    mimo_average_error,
    overall_time_error,
)

__version__ = "0.1.0"
