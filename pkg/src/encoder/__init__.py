"""
Encoder package
"""
from .graph import GraphAdjacency, build_graph, build_kg_graph, build_fused_graph
from .scoring import (
    ScoreFn, EncodedGraph, score, score_triples, score_tails, score_heads, score_relations,
    score_batch,
)
from .compgcn import CompGcnLayer, KgcModel, encode, encode_fused

__all__ = [
    'GraphAdjacency', 'build_graph', 'build_kg_graph', 'build_fused_graph',
    'ScoreFn', 'EncodedGraph', 'score', 'score_triples', 'score_tails', 'score_heads',
    'score_relations', 'score_batch',
    'CompGcnLayer', 'KgcModel', 'encode', 'encode_fused',
]
