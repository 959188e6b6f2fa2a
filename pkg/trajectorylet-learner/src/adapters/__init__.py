"""
Adapters for external skeleton formats
"""
from src.adapters.msr_adapter import convert_directory, load_msr_skeleton

__all__ = ["convert_directory", "load_msr_skeleton"]
