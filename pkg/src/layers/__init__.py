"""
Layers module for the SpecTran pipeline
"""

from src.layers.ingestion import InteractionLog, build_interaction_log, load_interactions
from src.layers.splitting import SplitDataset, UserSequence, chronological_split
from src.layers.spectral import SpectralLayer, SpectrumReport, SvdFactors, cumulative_spectrum, svd_decompose
from src.layers.adapter import FusionLayer, MlpAdapter, SpecTranAdapter, SpecTranConfig, StaticAdapter
from src.layers.backbone import BackboneConfig, SasrecBackbone
from src.layers.model import SequentialRecommender
from src.layers.scoring import EarlyStopState, MetricsRow, early_stop_update, evaluate_split
