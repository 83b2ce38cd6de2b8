"""Run `nvdqd gate-verify cluster`; extra arguments (--config, --set, --out, --seed) are passed through.

Usage: python3 scripts/check_gates.py [--config FILE] [--set key=value ...]
"""
import sys

from _run import run

if __name__ == "__main__":
    sys.exit(run(["gate-verify", "cluster"], "check_gates"))
