"""
Parsers package
"""
from .manifest_parser import ManifestParser, load_manifest, manifest_to_dict, write_manifest
from .triple_parser import TsvDatasetParser, DatasetWriter, load_dataset, write_dataset
from .config_parser import load_train_config, dump_train_config
from .checkpoint_parser import (
    Checkpoint, CheckpointParser, CheckpointWriter, save_checkpoint, load_checkpoint,
    vocab_digest, store_vocab_digest, FUSED_NAME,
)

__all__ = [
    'ManifestParser', 'load_manifest', 'manifest_to_dict', 'write_manifest',
    'TsvDatasetParser', 'DatasetWriter', 'load_dataset', 'write_dataset',
    'load_train_config', 'dump_train_config',
    'Checkpoint', 'CheckpointParser', 'CheckpointWriter', 'save_checkpoint', 'load_checkpoint',
    'vocab_digest', 'store_vocab_digest', 'FUSED_NAME',
]
