"""Straggler-resilient coded distributed convolution.

A convolutional layer is split into overlapping spatial slices of the
input and disjoint output-channel groups of the filter, encoded with a
rotation-matrix code, executed on simulated workers, and decoded from any
``delta`` results.  A cost model selects the partition counts, and a
real-Vandermonde baseline codec exists for numerical-stability
comparisons.
"""

from .codec import (
    Codebook,
    RecoverySet,
    VandermondeCode,
    build_codebook,
    build_recovery,
    build_vandermonde_code,
    condition_number,
    decode_blocks,
    encode_list,
    joint_generator,
    rotation_matrix,
    vandermonde_decode,
    vandermonde_recovery,
)
from .costs import (
    CostBreakdown,
    CostCoefficients,
    LayerDims,
    NodeVolumes,
    node_volumes,
    optimal_continuous,
    optimize_discrete,
    registry_layers,
    total_cost,
)
from .errors import (
    CodedConvError,
    ConfigError,
    DecodeInfeasibleError,
    ParameterError,
    ShapeError,
    StarvationError,
)
from .partition import (
    ChannelPlan,
    SpatialPlan,
    merge_output,
    partition_filters,
    partition_input,
    plan_spatial,
)
from .simulation import (
    SimConfig,
    SimReport,
    Subtask,
    TimeModel,
    WorkerOutput,
    WorkerSpec,
    collect_first_delta,
    dispatch,
    place_random_stragglers,
    run_end_to_end,
    worker_compute,
)
from .tensors import (
    ConvParams,
    as_filter_tensor,
    as_input_tensor,
    concat_axis,
    conv3d_ref,
    mse,
    output_dims,
    pad_input,
    reshape,
    vec,
)

__all__ = [
    "ChannelPlan",
    "Codebook",
    "CodedConvError",
    "ConfigError",
    "ConvParams",
    "CostBreakdown",
    "CostCoefficients",
    "DecodeInfeasibleError",
    "LayerDims",
    "NodeVolumes",
    "ParameterError",
    "RecoverySet",
    "ShapeError",
    "SimConfig",
    "SimReport",
    "SpatialPlan",
    "StarvationError",
    "Subtask",
    "TimeModel",
    "VandermondeCode",
    "WorkerOutput",
    "WorkerSpec",
    "as_filter_tensor",
    "as_input_tensor",
    "build_codebook",
    "build_recovery",
    "build_vandermonde_code",
    "collect_first_delta",
    "concat_axis",
    "condition_number",
    "conv3d_ref",
    "decode_blocks",
    "dispatch",
    "encode_list",
    "joint_generator",
    "merge_output",
    "mse",
    "node_volumes",
    "optimal_continuous",
    "optimize_discrete",
    "output_dims",
    "pad_input",
    "partition_filters",
    "partition_input",
    "place_random_stragglers",
    "plan_spatial",
    "registry_layers",
    "reshape",
    "rotation_matrix",
    "run_end_to_end",
    "total_cost",
    "vandermonde_decode",
    "vandermonde_recovery",
    "vec",
    "worker_compute",
]
