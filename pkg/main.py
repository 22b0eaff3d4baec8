#!/usr/bin/env python3
"""
Cournot Private Costs
Main entry point for the command-line toolkit
"""

import os
import sys

# Add project root to Python path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from frontend.cli import main as run_cli


def main(argv=None):
    try:
        return run_cli(argv)
    except KeyboardInterrupt:
        print("\n👋 Interrupted")
        return 0
    except Exception as e:
        print(f"💥 Fatal error: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
