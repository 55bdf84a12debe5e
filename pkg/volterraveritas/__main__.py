import sys

from volterraveritas.harness.cli import main

sys.exit(main())
