"""Gray-box regression testing for a versioned grid-world cooking game."""
from pathlib import Path

DATA_DIR = Path(__file__).parent / "data"

__version__ = "0.1.0"
