#!/usr/bin/env python3
"""
Metric Estimands Toolkit - Command-line launcher
"""

import sys

from metric_estimands.cli import main

if __name__ == "__main__":
    sys.exit(main())
