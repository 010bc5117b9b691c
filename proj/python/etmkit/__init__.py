"""Entity-aware embedded topic models (ETM and D-ETM) with entity linking."""

from ._etmkit import (
    AliasTable,
    BowDocument,
    DataError,
    DetmHyper,
    Error,
    NumericalError,
    RunConfig,
    TrainConfig,
    TrainedModel,
    UsageError,
    aggregate_ci,
    canonical_entity_key,
    compute_beta,
    cosine_similarity,
    document_completion_perplexity,
    fallback_vector,
    hungarian,
    link_text,
    load_embeddings,
    run_pipeline,
    sample_etm,
    sample_lda,
    sample_random_walk,
    softmax,
    tokenize,
    topic_recovery_score,
    total_variation,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")]
