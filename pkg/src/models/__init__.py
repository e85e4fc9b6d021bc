"""
Models package
"""
from .kg_data import (
    FUSED_KG_ID, SPLITS, EntityRef, RelationRef, Triple, SeedAlignment,
    KgData, FusedKg, MultiKgStore,
)
from .config import (
    TrainConfig, KgEntry, AlignmentEntry, DatasetManifest, SamplingSpec, RunConfig,
)
from .records import (
    FilterMode, Task, Slot, NegativeSample, DistillationBatch, GateState,
    KgMetrics, RankingReport, AlignmentComponentReport,
)

__all__ = [
    'FUSED_KG_ID', 'SPLITS', 'EntityRef', 'RelationRef', 'Triple', 'SeedAlignment',
    'KgData', 'FusedKg', 'MultiKgStore',
    'TrainConfig', 'KgEntry', 'AlignmentEntry', 'DatasetManifest', 'SamplingSpec', 'RunConfig',
    'FilterMode', 'Task', 'Slot', 'NegativeSample', 'DistillationBatch', 'GateState',
    'KgMetrics', 'RankingReport', 'AlignmentComponentReport',
]
