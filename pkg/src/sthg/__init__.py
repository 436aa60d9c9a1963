"""Who-speaks-when for egocentric video: one heterogeneous graph over visible faces and the camera wearer."""

from .types import BBox, EdgeKind, HeteroGraph, NodeType, Segment, VideoBundle, frame_to_time, iou
from .graph import GraphConfig, build_graph, graph_density

__version__ = "0.1.0"

__all__ = [
    "BBox", "EdgeKind", "HeteroGraph", "NodeType", "Segment", "VideoBundle", "frame_to_time", "iou",
    "GraphConfig", "build_graph", "graph_density",
]
