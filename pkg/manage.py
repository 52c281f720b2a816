#!/usr/bin/env python
"""Command-line entry point for the experiment runner."""
import sys


def main():
    try:
        from ilro.cli import main as run
    except ImportError as exc:
        raise ImportError(
            "Couldn't import the ilro package. Are the requirements installed "
            "and is this directory on your PYTHONPATH?"
        ) from exc
    sys.argv[0] = 'ilro'
    run()


if __name__ == '__main__':
    main()
