"""
src package
"""
