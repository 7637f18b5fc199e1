"""
Configuration module for SpecTran

Run configuration lives in src.config.run_config.
"""

from src.config.constants import *
from src.config.settings import Settings, get_settings
