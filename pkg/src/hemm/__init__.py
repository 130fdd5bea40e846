"""Encrypted matrix multiplication over CKKS with a memory and traffic cost model."""

__version__ = "0.1.0"
