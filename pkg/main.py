"""
Main entry point for the attnpipe command line.

Usage:
    python main.py synth scenario.json --seed 7 --out out/
    python main.py run out/session.jsonl --speed max
"""

import sys

from cli import main

if __name__ == "__main__":
    sys.exit(main())
