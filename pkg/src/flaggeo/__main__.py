import sys

from flaggeo.cli import main

sys.exit(main())
