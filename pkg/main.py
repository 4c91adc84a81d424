"""anchor-scene main entry point (wrapper)."""

import sys

from anchor_scene.main import main

if __name__ == "__main__":
    sys.exit(main())
