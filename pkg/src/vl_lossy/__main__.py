import sys

from .vl_cli import main

sys.exit(main())
