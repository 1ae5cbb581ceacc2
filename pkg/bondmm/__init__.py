"""BondMM-A fixed-income AMM engine and market simulator."""

from __future__ import annotations

import json
from pathlib import Path

_MANIFEST = json.loads((Path(__file__).parent / "manifest.json").read_text(encoding="utf-8"))

__version__: str = _MANIFEST["version"]
