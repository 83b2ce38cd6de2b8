"""Run `nvdqd fig2`; extra arguments (--config, --set, --out, --seed) are passed through.

Usage: python3 scripts/reproduce_fig2.py [--config FILE] [--set key=value ...]
"""
import sys

from _run import run

if __name__ == "__main__":
    sys.exit(run(["fig2"], "reproduce_fig2"))
