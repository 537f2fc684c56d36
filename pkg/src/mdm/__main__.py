"""Allow running the command line as ``python -m mdm``."""

import sys

from mdm.cli import main

sys.exit(main())
