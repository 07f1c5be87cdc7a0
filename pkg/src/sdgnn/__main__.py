import sys

from sdgnn.cli import main

sys.exit(main())
