import os
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# Where the real benchmark corpora live when the user supplies them.
REAL_DATA_DIR = Path(os.environ.get("VSAMIL_DATA_DIR", Path(__file__).parent.parent / "data"))


def real_dataset_path(stem):
    """Path to a user-supplied benchmark file (jsonl preferred, else csv)."""
    for suffix in (".jsonl", ".csv", ".svmlight"):
        candidate = REAL_DATA_DIR / f"{stem}{suffix}"
        if candidate.exists():
            return candidate
    return None
