"""
Datasets package
"""
from .sampling import sample_dangling
from .synthetic import make_synthetic_complementary

__all__ = ['sample_dangling', 'make_synthetic_complementary']
