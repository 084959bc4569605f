#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Suite dispatcher
Loads suite_<name>.py from this directory and runs it

Usage: python verifier.py <suite> [cli options]
Example: python verifier.py identities --gamma 1
"""

import sys
import os
import io
import importlib.util

verifier_dir = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, verifier_dir)

SUITE_NAMES = ("identities", "cone", "gmc")


def load_suite(name):
    """
    Dynamically load the module for one verification suite

    Args:
        name: suite name (identities, cone or gmc)

    Returns:
        The suite module, or None if there is no such file
    """
    suite_file = os.path.join(verifier_dir, f"suite_{name}.py")

    if name not in SUITE_NAMES or not os.path.exists(suite_file):
        return None

    spec = importlib.util.spec_from_file_location(f"suite_{name}", suite_file)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    if not hasattr(module, "run_suite"):
        raise ImportError(f"suite_{name}.py defines no run_suite(config)")
    return module


def main(argv=None):
    """Shortcut for `main.py verify <suite> ...`"""
    from src.cli import main as cli_main

    argv = list(sys.argv[1:] if argv is None else argv)
    return cli_main(["verify"] + argv, load_suite=load_suite)


if __name__ == "__main__":
    sys.stdout = io.TextIOWrapper(sys.stdout.buffer, encoding="utf-8", errors="replace")
    sys.stderr = io.TextIOWrapper(sys.stderr.buffer, encoding="utf-8", errors="replace")
    sys.exit(main())
