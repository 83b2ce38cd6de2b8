"""Run `nvdqd verify`; extra arguments (--config, --set, --out, --seed) are passed through.

Usage: python3 scripts/verify_all.py [--config FILE] [--set key=value ...]
"""
import sys

from _run import run

if __name__ == "__main__":
    sys.exit(run(["verify"], "verify_all"))
