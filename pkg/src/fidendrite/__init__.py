"""Topology of self-similar sets with the finite intersection property.

Systems of planar contraction similarities, certified covers of their
attractors, intersection clusters, intersection graphs and dendrite tests,
address counts and Zerner constants, and slope parameters of invariant arcs.
"""

from ._kernels import BACKEND
from .attractor import BoundingDisk, CellCover, ResourceError, bounding_disk, cover, hausdorff_upper
from .graph import (
    DendriteVerdict,
    IntersectionGraph,
    Outcome,
    build_graph,
    dendrite_verdict,
    is_tree,
    refine_graph,
    to_dot,
)
from .ifs_core import IDENTITY, Address, SimSystem, Similarity, compose, eval_address, parse_word
from .intersection import FIReport, IntersectionCluster, Verdict, detect_address_pair, fi_report, pair_expand
from .order import (
    InconclusiveError,
    OrderReport,
    StableNeighborhood,
    count_addresses,
    order_report,
    stable_neighborhood,
    zerner_constant,
)
from .slope import InvariantArc, SlopeEstimate, arg_increment, invariant_arc, parameter_match, slope_parameter

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "IDENTITY", "Address", "BoundingDisk", "CellCover", "DendriteVerdict", "FIReport",
    "InconclusiveError", "IntersectionCluster", "IntersectionGraph", "InvariantArc", "OrderReport",
    "Outcome", "ResourceError", "SimSystem", "Similarity", "SlopeEstimate", "StableNeighborhood",
    "Verdict", "arg_increment", "bounding_disk", "build_graph", "compose", "count_addresses", "cover",
    "dendrite_verdict", "detect_address_pair", "eval_address", "fi_report", "hausdorff_upper",
    "invariant_arc", "is_tree", "order_report", "pair_expand", "parameter_match", "parse_word",
    "refine_graph", "slope_parameter", "stable_neighborhood", "to_dot", "zerner_constant",
]
