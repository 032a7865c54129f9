# evaluation: metrics, OOD detection, reports, plots
# Submodules are imported explicitly; metrics is the only one loaded here.
from evaluation.metrics import MetricBlock, metric_block, shannon_entropy

__all__ = ["MetricBlock", "metric_block", "shannon_entropy"]
