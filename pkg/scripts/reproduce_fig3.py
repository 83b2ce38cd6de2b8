"""Run `nvdqd fig3a fig3bc`; extra arguments (--config, --set, --out, --seed) are passed through.

Usage: python3 scripts/reproduce_fig3.py [--config FILE] [--set key=value ...]
"""
import sys

from _run import run

if __name__ == "__main__":
    sys.exit(run(["fig3a", "fig3bc"], "reproduce_fig3"))
