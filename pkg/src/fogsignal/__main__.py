import sys

from fogsignal.cli import main

sys.exit(main())
