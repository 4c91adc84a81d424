import sys

from anchor_scene.cli import main

sys.exit(main())
