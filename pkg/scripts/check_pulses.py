"""Run `nvdqd pulse-check rwa-check`; extra arguments (--config, --set, --out, --seed) are passed through.

Usage: python3 scripts/check_pulses.py [--config FILE] [--set key=value ...]
"""
import sys

from _run import run

if __name__ == "__main__":
    sys.exit(run(["pulse-check", "rwa-check"], "check_pulses"))
