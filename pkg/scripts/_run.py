"""Shared helper: forward to the nvdqd command line with a default output directory."""
import sys
from pathlib import Path

from nvdqd.cli import main


def run(commands: list[str], default_out: str) -> int:
    extra = sys.argv[1:]
    if "--out" not in extra:
        extra = ["--out", str(Path("results") / default_out)] + extra
    code = 0
    for cmd in commands:
        code = max(code, main([cmd, *extra]))
    return code
