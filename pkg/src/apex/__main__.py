from __future__ import annotations

import sys

from apex.cli import main

sys.exit(main())
