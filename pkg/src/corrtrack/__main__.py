"""``python -m corrtrack``."""
import sys

from .cli import main

sys.exit(main())
