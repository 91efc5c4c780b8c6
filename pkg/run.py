import sys

from crowdagg.main import cli_dispatch


if __name__ == "__main__":
    sys.exit(cli_dispatch(sys.argv[1:]))
