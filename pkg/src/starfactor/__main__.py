import sys

from starfactor.cli import main

sys.exit(main())
