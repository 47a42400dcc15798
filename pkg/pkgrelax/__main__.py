import sys

from pkgrelax.cli import main

sys.exit(main())
