import sys

from fairdm.cli import main

sys.exit(main())
