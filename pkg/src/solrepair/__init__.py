"""Repair audited Solidity vulnerabilities: dependency-graph localization
plus a staged LLM patch pipeline, with an evaluation harness."""

__version__ = "0.1.0"

from .depgraph import DependencyGraph, DepEdge, DepNode, EdgeKind, NodeKind
from .analyzer import build_dependency_graph
from .pipeline import PatchClass, PipelineConfig, run_pipeline

__all__ = ["DependencyGraph", "DepEdge", "DepNode", "EdgeKind", "NodeKind",
           "build_dependency_graph", "PatchClass", "PipelineConfig",
           "run_pipeline", "__version__"]
