import sys

from radius_lsh.cli import main

sys.exit(main())
