"""Score-matrix fusion, Recall@K evaluation and retrieval-loss kernels."""

from ._core import (
    DegenerateInputError,
    FormatError,
    FusionretError,
    IoError,
    ParameterError,
    ShapeError,
    ValidationError,
    cosine_similarity,
    default_grid,
    fuse,
    itc_loss,
    itm_loss,
    iterative_ensemble,
    lhp_sample,
    load_matrix,
    metrics_report,
    mim_loss,
    mlm_loss,
    recall_at_k,
    rerank,
    row_softmax,
    select_topk,
    sweep_weight,
    synth_embeddings,
    synth_model_scores,
    topk_rows,
    total_loss,
    write_matrix,
)

__all__ = [name for name in dir() if not name.startswith("_")]
