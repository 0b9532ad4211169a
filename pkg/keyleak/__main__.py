"""Entry point for ``python -m keyleak``"""
import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
