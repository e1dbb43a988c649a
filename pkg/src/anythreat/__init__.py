"""Insider-threat detection pipeline with AMOTRE oversampling and class decomposition."""
from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
