import logging
import sys


def main():
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)

    from src.cli.commands import run

    sys.exit(run())


if __name__ == "__main__":
    main()
