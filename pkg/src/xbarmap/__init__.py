"""Map feed-forward neural networks onto crossbar-array neuromorphic cores
and check the mapped computation against a dense reference."""

from .connectivity import ConnectivityList, Synapse, build_connectivity, virtual_pad_then_prune
from .errors import (
    ConfigError,
    DimensionError,
    ManifestError,
    MappingError,
    MissingSourceError,
    ShapeError,
    WeightFileError,
    XbarError,
)
from .estimator import CrossbarMapper, DenseNetwork
from .ir import (
    LayerSpec,
    NetworkSpec,
    NeuronId,
    TensorShape,
    WeightStore,
    conv_output_shape,
    dump_weights,
    load_weights,
    parse_network,
    serialize_network,
)
from .mapper import (
    CoreAllocation,
    CoreSpec,
    MappingResult,
    TilePlan,
    axons_required,
    choose_tile_shape,
    map_layer,
    map_network,
)
from .simcore import (
    LIFParams,
    VerificationReport,
    core_mvm,
    dense_reference,
    lif_step,
    run_mapped_inference,
    run_snn,
    verify,
)

__version__ = "0.1.0"
