"""Python bindings for the trustdss core."""

from ._trustdss import (
    Bandit,
    DataError,
    NotFoundError,
    Service,
    ServiceError,
    StateError,
    arm_catalog,
    auc_pr,
    auc_roc,
    default_population,
    expected_rating,
    feature_names,
    generate_cohort,
    normalize_rating,
    rate_sequence,
    ucb_value,
)

__all__ = [
    "Bandit",
    "DataError",
    "NotFoundError",
    "Service",
    "ServiceError",
    "StateError",
    "arm_catalog",
    "auc_pr",
    "auc_roc",
    "default_population",
    "expected_rating",
    "feature_names",
    "generate_cohort",
    "normalize_rating",
    "rate_sequence",
    "ucb_value",
]

__version__ = "0.1.0"
