import sys

from rdcp.cli import main

sys.exit(main())
