"""
Put src/ on the import path the way main.py does.
"""
import sys
from pathlib import Path

src_dir = Path(__file__).resolve().parent.parent / "src"
if str(src_dir) not in sys.path:
    sys.path.append(str(src_dir))
