#!/usr/bin/env python3
"""Run the full gallery and write verdict JSON + series CSV.

Usage: python scripts/run_gallery.py [out_dir] [--config cfg.json]
"""

import sys

from mapnets.cli import main

if __name__ == "__main__":
    args = ["gallery", "run"]
    rest = sys.argv[1:]
    if rest and not rest[0].startswith("-"):
        args += ["--out", rest[0]]
        rest = rest[1:]
    sys.exit(main(args + rest))
