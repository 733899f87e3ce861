"""Console entry point: python restake_lab.py <subcommand> ..."""

import sys

from core.cli import main

if __name__ == "__main__":
    sys.exit(main())
