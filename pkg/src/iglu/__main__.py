import sys

from iglu.cli import main

sys.exit(main())
