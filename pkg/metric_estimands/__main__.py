import sys

from metric_estimands.cli import main

if __name__ == "__main__":
    sys.exit(main())
