"""Entry point for python -m lagfactor."""

import sys

from .cli import main

sys.exit(main())
