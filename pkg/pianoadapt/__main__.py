import sys

from pianoadapt.main import main

sys.exit(main())
