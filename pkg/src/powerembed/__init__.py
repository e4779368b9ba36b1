"""Graph node embeddings from normalized power iteration, with baselines and experiments."""
from .embeddings import (
    EmbeddingList,
    FeatureSelection,
    a_x_embed,
    ase,
    cov_embed,
    embed,
    oracle_eigen,
    oversquash_sensitivity,
    power_embed,
    power_embed_operator,
    power_iterates,
    select_features,
    unnormalized_embed,
)
from .errors import (
    EigFailed,
    EigGapWarning,
    InvalidEdge,
    InvalidLabel,
    InvalidParams,
    NotPSD,
    NotSymmetric,
    PowerEmbedError,
    RankDeficient,
    ShapeError,
    TooLarge,
    ZeroColumn,
)
from .graph import (
    Graph,
    OperatorKind,
    apply_operator,
    degrees,
    graph_from_edge_list,
    operator_dense,
    operator_sparse,
    read_edge_list,
    write_edge_list,
)
from .linalg import (
    EigenDecomposition,
    column_normalize,
    gram_inverse_normalize,
    pca_reduce,
    principal_angles,
    subspace_error,
    sym_eig,
)
from .random_graphs import (
    GaussianMixtureParams,
    SbmParams,
    expected_adjacency,
    make_2b_sbm,
    make_rng,
    sample_2b_sbm_dataset,
    sample_features,
    sample_sbm,
)

__version__ = "0.1.0"
