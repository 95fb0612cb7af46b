"""Snapshot Hadamard-transform spectrometry with sub-Hadamard-S matrix coding.

Library + CLI for simulating slit, traditional HTS, snapshot HTS, and MMS
measurements of a shared scene, decoding them, and benchmarking SNR against
the disturbance lower bound.
"""

from .analysis import (
    CONSENSUS_ROW,
    METHODS,
    BoundReport,
    SnrSample,
    Summary,
    eval_bound,
    predicted_degradation_db,
    snr_db,
    summarize,
    theoretical_multiplex_gain,
)
from .codes import SMatrix, ValidationReport, build_s_matrix, is_supported_order, s_inverse, validate_s_matrix
from .forward import (
    Measurement,
    NoiseSpec,
    SnapshotFrame,
    add_noise,
    measure_hts,
    measure_mms,
    measure_slit,
    measure_snapshot,
)
from .harness import (
    BoundAggregate,
    ExperimentConfig,
    SweepResult,
    calibrate_sigma,
    default_k_grid,
    emit_report,
    resolve_sigma,
    run_sweep,
    run_trial,
)
from .nnls import nnls, nnls_columns
from .recon import (
    EmbeddedEstimate,
    RowSpectra,
    calibrate_sub_s,
    consensus_spectrum,
    decode_inverse,
    decode_nnls,
    shift_extract,
)
from .report import LoadedResult, load_result
from .scene import (
    EmbeddedScene,
    IntensityField,
    Spectrum,
    SubSMatrix,
    load_spectrum,
    make_sub_s,
    sample_intensity,
    shift_embed,
    synth_spectrum,
)

__version__ = "0.1.0"
