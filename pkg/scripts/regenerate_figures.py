#!/usr/bin/env python3
"""
Regenerate the figure CSV bundle
"""

import os
import sys

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from metric_estimands.cli import main
from metric_estimands.config import settings


def regenerate(out_dir: str) -> int:
    """Run the figures command into out_dir"""
    print(f"Writing figure data to {out_dir} ...")
    return main(["figures", "--out", out_dir])


if __name__ == "__main__":
    print("📈 Metric Estimands Toolkit - Figure Regeneration")
    print("=" * 60)

    out_dir = sys.argv[1] if len(sys.argv) > 1 else settings.output_dir
    code = regenerate(out_dir)
    if code != 0:
        print(f"❌ Figure regeneration failed with exit code {code}")
        sys.exit(code)

    print("\n🎉 Figure data regenerated successfully!")
    print("\nFiles:")
    for name in sorted(os.listdir(out_dir)):
        if name.startswith("fig") and name.endswith(".csv"):
            print(f"  {os.path.join(out_dir, name)}")
