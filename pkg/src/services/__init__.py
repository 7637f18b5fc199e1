"""
Services module for SpecTran
"""

from src.services.training_service import (
    EfficiencyReport,
    Trainer,
    TrainingResult,
)
from src.services.pipeline_service import (
    PipelineService,
    cmd_diagnose,
    cmd_evaluate,
    cmd_preprocess,
    cmd_synth,
    cmd_train,
)

__all__ = [
    'EfficiencyReport',
    'Trainer',
    'TrainingResult',
    'PipelineService',
    'cmd_diagnose',
    'cmd_evaluate',
    'cmd_preprocess',
    'cmd_synth',
    'cmd_train',
]
