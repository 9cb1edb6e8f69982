"""Node-order-invariant graph classification from adjacency matrices.

Graphs are matched against small learnable subgraph templates under all
simultaneous row/column relabelings (exactly, or through a spectral
surrogate), the per-window match scores are min-pooled and softmax-rescaled
into feature tensors, and a small fully-connected network classifies the
result.  Everything trains end to end with hand-written gradients.
"""

from .bench import BenchRecord, brute_vs_fast, time_vs_c, time_vs_k, write_csv
from .checkpoint import load_checkpoint, save_checkpoint
from .classifier import (
    AdamState,
    Gradients,
    LayerParams,
    MLPParams,
    ModelParams,
    TrainConfig,
    adam_step,
    backward_full,
    build_model,
    cross_entropy,
    flatten,
    forward_full,
    forward_mlp,
    init_adam,
    init_mlp,
    named_gradients,
    named_parameters,
    one_hot,
    predict,
    train,
)
from .data import (
    Dataset,
    FoldSplit,
    GraphInstance,
    balance,
    gen_synthetic,
    load_native,
    load_tu_dataset,
    make_folds,
    metrics,
    motif_matrix,
    pad_to_max,
    save_native,
)
from .errors import CapacityError, DataFormatError, NumericalError
from .features import (
    BruteMatch,
    FastMatch,
    FeatureMap,
    LayerConfig,
    backward_layer,
    backward_stack,
    brute_match,
    eigen_lower_bound,
    extract_submatrix,
    fast_match,
    forward_layer,
    forward_layer_windows,
    forward_stack,
    min_pool,
    softmax_normalize,
)
from .linalg import (
    MAX_BRUTE_K,
    EigenDecomposition,
    abs_entrywise,
    enumerate_permutations,
    frobenius_sq,
    invert_permutation,
    permutation_matrix,
    permute_conjugate,
    symmetric_eigendecomposition,
)

__version__ = "0.1.0"
