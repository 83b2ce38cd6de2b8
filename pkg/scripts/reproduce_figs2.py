"""Run `nvdqd figs2`; extra arguments (--config, --set, --out, --seed) are passed through.

Usage: python3 scripts/reproduce_figs2.py [--config FILE] [--set key=value ...]
"""
import sys

from _run import run

if __name__ == "__main__":
    sys.exit(run(["figs2"], "reproduce_figs2"))
