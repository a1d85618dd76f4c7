"""Byzantine-tolerant centroid aggregation and a small federated-learning simulator."""

from .aggregators import AGGREGATORS, AggregationIntegrityError, AggregationResult, get_aggregator
from .candidates import Layout, candidate_centroids, centroid_hyperbox, covering_ball, trimmed_trusted_hyperbox
from .evaluation import GroundTruth, approximation_ratio, check_validity

__version__ = "0.1.0"

__all__ = [
    "AGGREGATORS",
    "AggregationIntegrityError",
    "AggregationResult",
    "GroundTruth",
    "Layout",
    "approximation_ratio",
    "candidate_centroids",
    "centroid_hyperbox",
    "check_validity",
    "covering_ball",
    "get_aggregator",
    "trimmed_trusted_hyperbox",
]
