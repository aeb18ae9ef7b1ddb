"""Click-counting statistics of multiplexed photodetection.

Exact click distributions for common families of quantum states of
light, reproducible finite-sample histograms, a moment-matrix
nonclassicality test with bootstrapped significance, and a small
feed-forward network trained from scratch to recognise nonclassical
click statistics.
"""

from .states import (
    ClickDistribution,
    Coherent,
    ConvergenceError,
    DetectorConfig,
    EvenCoherent,
    Fock,
    Mixture,
    Npats,
    Squeezed,
    StateSpec,
    Thermal,
    click_distribution,
    d_symbol,
    g_function,
    mean_photon_number,
    params_for_mean,
    state_from_dict,
    state_from_json,
    state_to_dict,
    state_to_json,
)
from .sampling import (
    ClickHistogram,
    SampleSpec,
    derive_seed,
    derive_stream,
    sample_counts,
    sample_histogram,
)
from .moments import (
    MomentsTestResult,
    MomentVector,
    estimate_moments,
    min_eigenvalue,
    moment_matrix,
    moment_weights,
    moments_test,
)
from .mlp import (
    LinearModel,
    ModelFormatError,
    NetworkModel,
    TrainingConfig,
    TrainingError,
    fit_linear,
    initialize_network,
    load_model,
    predict,
    predict_batch,
    predict_linear,
    save_model,
    train,
)
from .datagen import (
    DatasetFormatError,
    DatasetRow,
    LabeledDataset,
    family_label,
    generate_evaluation_set,
    generate_training_data,
    read_dataset,
    write_dataset,
)
from .experiments import (
    Scenario,
    ScenarioConfigError,
    ScenarioReport,
    emit_plot,
    fig4_scenario,
    fig5_scenario,
    fig6_scenario,
    read_report_rows,
    run_fig3_baseline,
    run_scenario,
    write_report,
)

__version__ = "0.1.0"
