# utils/data: samples, datasets, prediction records
# I/O lives in utils.data.dataset_io (imported explicitly; it pulls in nets/evaluation).
from utils.data.samples import (
    EVALUATION_TAGS,
    STANDARD_TAGS,
    Dataset,
    DistributionTag,
    LabeledSample,
    PredictionRecord,
    TagKind,
)
from utils.data.split import check_disjoint, split_dataset

__all__ = [
    "EVALUATION_TAGS",
    "STANDARD_TAGS",
    "Dataset",
    "DistributionTag",
    "LabeledSample",
    "PredictionRecord",
    "TagKind",
    "check_disjoint",
    "split_dataset",
]
