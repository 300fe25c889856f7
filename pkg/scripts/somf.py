#!/usr/bin/env python3
"""SOMF benchmark command line.

Usage:
    python scripts/somf.py run configs/synthetic_sweep.toml
    python scripts/somf.py oracle configs/synthetic_sweep.toml
    python scripts/somf.py summarize results/synthetic_sweep
    python scripts/somf.py gen configs/synthetic_spec.toml -o data/synthetic.dmat
"""

import sys
from pathlib import Path

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.bench.cli import main

if __name__ == "__main__":
    sys.exit(main())
