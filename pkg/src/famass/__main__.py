import sys

from famass.cli import main

sys.exit(main())
