"""
Utility modules for SpecTran
"""

from src.utils.logging_config import setup_logging, get_logger
from src.utils.errors import SpecTranError
