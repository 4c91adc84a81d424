"""Main entry point for anchor-scene."""

import sys

from anchor_scene.cli import main as cli_main


def main() -> int:
    """Run the anchor-scene command line."""
    return cli_main(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
