#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Main entry point for fzzlab
Usage: python main.py {eval,verify,dump} ...

Examples:
  python main.py eval u0_bar --gamma 1 --alpha 2
  python main.py verify identities --gamma 1
  python main.py dump cone --preset cone-small --seed 7
"""

import sys
import os
import io

# Force UTF-8 encoding for stdout/stderr, the console markers are not ASCII
sys.stdout = io.TextIOWrapper(sys.stdout.buffer, encoding="utf-8", errors="replace")
sys.stderr = io.TextIOWrapper(sys.stderr.buffer, encoding="utf-8", errors="replace")

# Add this directory to the path so src and the suites import
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.cli import main
from verifier import load_suite


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:], load_suite=load_suite))
