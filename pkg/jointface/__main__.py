import sys

from jointface.cli.main import main

sys.exit(main())
