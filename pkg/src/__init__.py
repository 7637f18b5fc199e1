"""
SpecTran - spectral-aware injection of semantic item embeddings into sequential recommenders
"""

__version__ = "1.0.0"
__author__ = "DataForge Team"
