import sys

from lppl.cli.main import main

sys.exit(main())
