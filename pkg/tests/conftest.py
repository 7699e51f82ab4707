import sys
from pathlib import Path

# tests import shared helpers from this module directly
sys.path.insert(0, str(Path(__file__).parent))

_DATA = Path(__file__).parent.parent / "src" / "medcodeflow" / "data"


def bundled_data(name: str) -> Path:
    return _DATA / name
