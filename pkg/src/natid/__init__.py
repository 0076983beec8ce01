"""Stance labelling, political-homophily analysis and user classification
for territories with independence movements."""

from .model import (
    BASQUE_COUNTRY,
    CATALONIA,
    SCOTLAND,
    Dataset,
    StanceLabel,
    Territory,
    Tweet,
    UserRecord,
    get_territory,
    validate_dataset,
)

__all__ = [
    "BASQUE_COUNTRY",
    "CATALONIA",
    "SCOTLAND",
    "Dataset",
    "StanceLabel",
    "Territory",
    "Tweet",
    "UserRecord",
    "get_territory",
    "validate_dataset",
]

__version__ = "0.1.0"
