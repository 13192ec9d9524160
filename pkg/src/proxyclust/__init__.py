"""Interest-conditioned multiple clustering via learned proxy embeddings."""

from .embedding import (
    PromptTemplate,
    TokenSequence,
    TokenTable,
    UnitVector,
    dot,
    lookup_token,
    normalize,
    render_prompt,
)
from .encoder import (
    BuiltinEncoder,
    FiniteDiffBackend,
    RemoteEncoder,
    encode,
    finite_diff_grad,
    loss_grad_wrt_proxy,
    similarity_loss,
)
from .concepts import (
    ConceptSpec,
    SelectedReference,
    fallback_wordlist,
    load_concept_spec,
    score_candidates,
    select_reference,
)
from .optimizer import (
    HyperParams,
    ObjectiveContext,
    ProxyState,
    adam_step,
    contrastive_regularizer,
    objective,
    objective_grad,
    optimize_all,
    optimize_proxy,
)
from .clustering import (
    KMeansResult,
    Labeling,
    cross_clustering_matrix,
    kmeans,
    kmeans_restarts,
    nmi,
    rand_index,
)
from .bounds import (
    BoundReport,
    ScalarFamily,
    bound_gap,
    encoder_family_check,
    estimate_lipschitz,
    verify_theorem,
)
from .matrixio import read_embedding_matrix, write_embedding_matrix
from .pipeline import RunConfig, grid_search, run_pipeline
from .synth import SyntheticSpec, generate_synthetic

__version__ = "0.1.0"
