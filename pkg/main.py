from __future__ import annotations

import sys

from wang_landau.cli import run_application

if __name__ == "__main__":
    sys.exit(run_application())
