"""Topological feature tracking for time-varying 2D scalar fields."""

__version__ = "0.1.0"

from .grid import GeoAxes, GridTopology, neighbor_table, vertex_neighbors
from .series import ScalarTimeSeries, load_series, precedes, save_raw_f64, write_csv_stack
from .morse import CriticalPoint, ManifoldLabeling, extract_extrema, segment_manifolds
from .mergetree import (
    BranchDecomposition,
    MergeTree,
    branch_decomposition,
    compute_merge_tree,
    subtree_query,
)
from .trackgraph import (
    Box,
    FilterSpec,
    PropRange,
    TrackingGraph,
    backward_map,
    build_tracking_graph,
    filter_graph,
    forward_map,
    query_component,
)
from .features import DeltaField, DescriptorSpec, Feature, evaluate_descriptor
from .tracking import FeatureTrack, MatchWeights, TrackingEvent, track_features
from .artifact import ArtifactStore, write_artifact

__all__ = [
    "__version__",
    "GeoAxes",
    "GridTopology",
    "neighbor_table",
    "vertex_neighbors",
    "ScalarTimeSeries",
    "load_series",
    "save_raw_f64",
    "write_csv_stack",
    "precedes",
    "CriticalPoint",
    "ManifoldLabeling",
    "extract_extrema",
    "segment_manifolds",
    "MergeTree",
    "BranchDecomposition",
    "compute_merge_tree",
    "branch_decomposition",
    "subtree_query",
    "Box",
    "FilterSpec",
    "PropRange",
    "TrackingGraph",
    "forward_map",
    "backward_map",
    "build_tracking_graph",
    "filter_graph",
    "query_component",
    "DeltaField",
    "DescriptorSpec",
    "Feature",
    "evaluate_descriptor",
    "MatchWeights",
    "FeatureTrack",
    "TrackingEvent",
    "track_features",
    "ArtifactStore",
    "write_artifact",
]
