"""Heterogeneous Ethereum interaction graphs, triplet-pattern feature
augmentation, and multi-view heterogeneous GNN classification of Ponzi
contracts."""

from heig.graph import (
    HEIG,
    Account,
    AccountType,
    InteractionEdge,
    InteractionType,
    TripletRelation,
    build_heig,
    classify_triplet,
    relation_stats,
)

__version__ = "0.1.0"

__all__ = [
    "HEIG",
    "Account",
    "AccountType",
    "InteractionEdge",
    "InteractionType",
    "TripletRelation",
    "build_heig",
    "classify_triplet",
    "relation_stats",
    "__version__",
]
