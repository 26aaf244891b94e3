import sys

from mugscreen.cli import main

sys.exit(main())
