"""spikebudget: energy-aware spiking network training and inference toolkit.

Trains leaky integrate-and-fire networks under stochastic firing-threshold
regularization and exposes threshold-modulated, budget-driven inference:
threshold sweeps, Pareto-front construction over (accuracy, spike count)
operating points, budget selection, and a spike-to-power battery model.
"""

from .lif import (
    LifParams,
    LifState,
    SpikeRaster,
    heaviside,
    lif_step,
    smooth_spike,
    spike_count,
    surrogate_grad,
)
from .thresholds import ThresholdDistribution, sample_threshold
from .encoder import (
    FilterBank,
    FilterBankSpec,
    IafParams,
    design_filterbank,
    encode,
    encode_dataset,
    export_raster,
    iaf_step,
)
from .network import (
    ForwardTrace,
    NetworkModel,
    build_network,
    build_synnet,
    count_spikes,
    forward,
    load_model,
    save_model,
    simulate_batch,
)
from .trainer import (
    TrainConfig,
    TrainHistory,
    TrainingDivergedError,
    relaxed_forward,
    scheduler_lr,
    train,
)
from .analysis import (
    MembraneDistribution,
    OperatingPoint,
    SweepCurve,
    collect_membrane_samples,
    default_theta_grid,
    delta_metrics,
    expected_spike_prob_continuous,
    expected_spike_prob_discrete,
    jensen_gap,
    spike_prob_fixed,
    sweep,
)
from .pareto import (
    Budget,
    EnergyModel,
    ParetoEntry,
    ParetoFront,
    battery_days,
    build_front,
    select_multi,
    select_single,
    spikes_to_power,
)
from .data import (
    EncodedDataset,
    LabeledWindow,
    SyntheticSpec,
    WindowDataset,
    load_dataset,
    load_rasters,
    load_ucihar_raw,
    make_synthetic,
    save_dataset,
    save_rasters,
)

__version__ = "0.1.0"
