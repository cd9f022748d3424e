#!/usr/bin/env python3
"""
WCamNet - Road friction estimation from roadside camera images
Command-line entry point; see `python wcamnet.py --help`.
"""
import sys

from app.cli import main


if __name__ == "__main__":
    sys.exit(main())
