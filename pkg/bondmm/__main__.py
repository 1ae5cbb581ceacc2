"""Allow `python -m bondmm`."""

import sys

from .cli import main

sys.exit(main())
