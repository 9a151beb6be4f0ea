"""Low-rank stationary vector processes: modeling, simulation, identification."""

from .polymat import (
    MatrixPolynomial,
    one_step_division,
    poly_add,
    poly_eval,
    poly_eval_grid,
    poly_mul,
    poly_shift,
    poly_sub,
)
from .transfer import (
    ImproperInverseError,
    RationalTransferMatrix,
    StabilityReport,
    frequency_response,
    rtm_add,
    rtm_block_diag,
    rtm_identity,
    rtm_inverse,
    rtm_mul,
    rtm_simplify,
    rtm_sub,
    rtm_vstack,
    scalar_fraction,
    stability_report,
)
from .timeseries import (
    NoiseSpec,
    TimeSeries,
    filter_series,
    generate_white_noise,
    read_timeseries_csv,
    simulate_low_rank,
    simulate_with_input,
    write_timeseries_csv,
)
from .spectra import (
    ClosedLoop,
    FeedbackModel,
    RankReport,
    SpectrumGrid,
    assemble_w_from_fhk,
    check_rank,
    closed_loop_transfer,
    constant_spectrum,
    default_freq_grid,
    extract_h_from_factor,
    extract_h_from_spectrum,
    select_full_rank_channels,
    spectrum_from_factor,
    spectrum_from_feedback,
)
from .identify import (
    ArmaxModel,
    ArmaxOrders,
    ChannelOrders,
    EquationErrorWarning,
    FitReport,
    InputIdentification,
    RankDeficientError,
    fit_ar,
    fit_armax_pem,
    fit_deterministic_channel,
    fit_input_channel,
    identify_with_input,
    predict_one_step,
    residual_series,
)

__version__ = "0.1.0"
