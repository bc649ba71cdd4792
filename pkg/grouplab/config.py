import os

from dotenv import load_dotenv

load_dotenv()

OUTPUT_DIR: str = os.getenv("GROUPLAB_OUTPUT_DIR", "runs")
LOG_LEVEL: str = os.getenv("GROUPLAB_LOG_LEVEL", "INFO").upper()

_workers: str = os.getenv("GROUPLAB_WORKERS", "1")
if not _workers.isdigit() or int(_workers) < 1:
    raise ValueError("GROUPLAB_WORKERS must be a positive integer")
WORKERS: int = int(_workers)

_progress: str = os.getenv("GROUPLAB_PROGRESS", "1")
if _progress not in ("0", "1"):
    raise ValueError("GROUPLAB_PROGRESS must be 0 or 1")
SHOW_PROGRESS: bool = _progress == "1"
