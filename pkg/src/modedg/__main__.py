"""Allow ``python -m modedg``."""
import sys

from modedg.cli import main

sys.exit(main())
