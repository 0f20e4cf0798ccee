import sys

from viraliency.main import main

sys.exit(main())
