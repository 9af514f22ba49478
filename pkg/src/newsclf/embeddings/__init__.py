from src.newsclf.embeddings.sgns import (
    SgnsConfig,
    SgnsResult,
    generate_pairs,
    nearest_neighbors,
    sgns_pair_grad,
    sgns_pair_loss,
    sgns_train,
)
from src.newsclf.embeddings.store import load_embeddings, save_embeddings

__all__ = [
    "SgnsConfig",
    "SgnsResult",
    "generate_pairs",
    "load_embeddings",
    "nearest_neighbors",
    "save_embeddings",
    "sgns_pair_grad",
    "sgns_pair_loss",
    "sgns_train",
]
