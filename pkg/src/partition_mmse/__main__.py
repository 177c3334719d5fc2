"""Run the command line interface with ``python3 -m partition_mmse``."""
import sys

from .cli import main

sys.exit(main())
