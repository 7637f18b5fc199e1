#!/usr/bin/env python
"""
Main entry point for SpecTran
Run: python main.py <command> [--config PATH] [--seed INT] [--deterministic] [--out DIR]

Commands: synth, preprocess, train, evaluate, diagnose
"""

import sys
from pathlib import Path

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from src.main import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
