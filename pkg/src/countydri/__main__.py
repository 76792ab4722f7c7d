import sys

from countydri.cli import main

sys.exit(main())
