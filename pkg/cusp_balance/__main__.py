"""Run the CLI with ``python -m cusp_balance``."""

import sys

from .cli import main

sys.exit(main())
