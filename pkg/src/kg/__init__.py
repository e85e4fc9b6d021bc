"""
KG core package
"""
from .fused import build_fused_kg
from .meta_path import parameter_swap_triples, alignment_closure, alignment_graph, augment_store
from .alignment_graph import alignment_component_report, DEFAULT_COMPONENT_THRESHOLD

__all__ = [
    'build_fused_kg', 'parameter_swap_triples', 'alignment_closure', 'alignment_graph',
    'augment_store', 'alignment_component_report', 'DEFAULT_COMPONENT_THRESHOLD',
]
