import sys

from flab.cli import main

if __name__ == '__main__':
    sys.exit(main())
