import sys

import main_configs  # noqa: F401  (dotenv + logging before anything else)
from cli.app_factory import main

## Command-line runner: one command per invocation, exit code 0/1/2/3
if __name__ == "__main__":
    sys.exit(main())
