"""
Evaluation package
"""
from .scorers import (
    Scorer, IndividualScorer, FusedScorer, EnsembleScorer, ensemble_scorer, encode_snapshot,
    individual_scorers, fused_scorers, ensemble_scorers,
)
from .ranking import (
    PositiveIndex, rank_from_scores, rank_query, compute_ranks, metrics_from_ranks, evaluate,
)
from .correlation import pearson_matrix, relation_correlation, relation_names_for, write_correlation_csv
from .report_writer import (
    write_report_tsv, write_report_json, write_rank_dump, write_component_csv, report_to_dict,
)

__all__ = [
    'Scorer', 'IndividualScorer', 'FusedScorer', 'EnsembleScorer', 'ensemble_scorer', 'encode_snapshot',
    'individual_scorers', 'fused_scorers', 'ensemble_scorers',
    'PositiveIndex', 'rank_from_scores', 'rank_query', 'compute_ranks', 'metrics_from_ranks', 'evaluate',
    'pearson_matrix', 'relation_correlation', 'relation_names_for', 'write_correlation_csv',
    'write_report_tsv', 'write_report_json', 'write_rank_dump', 'write_component_csv', 'report_to_dict',
]
