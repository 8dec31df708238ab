import os

from dotenv import load_dotenv

# Load .env if present (real env vars still win)
load_dotenv()


def _int_env(name: str, default: int) -> int:
    raw = os.getenv(name)
    try:
        return int(raw) if raw not in (None, "") else default
    except (TypeError, ValueError):
        return default


# --- Configuration ---
LOG_LEVEL = os.getenv("STLF_LOG_LEVEL", "INFO").upper()
DEFAULT_SEED = _int_env("STLF_SEED", 0)
ENSEMBLE_WORKERS = max(1, _int_env("STLF_WORKERS", 1))
TRAIN_LOG_EVERY = max(1, _int_env("STLF_TRAIN_LOG_EVERY", 100))

# Forecast service
CHECKPOINT_PATHS = [p.strip() for p in (os.getenv("STLF_CHECKPOINTS") or "").split(",") if p.strip()]
DATA_PATH = os.getenv("STLF_DATA_PATH")
PORT = _int_env("PORT", 8000)
MAX_FORECAST_DAYS = _int_env("STLF_MAX_FORECAST_DAYS", 31)

# Model geometry fixed by the pattern representation
HOURS_PER_DAY = 24
SEASON_HOURS = 168
INPUT_WINDOW = SEASON_HOURS
OUTPUT_WINDOW = HOURS_PER_DAY
CALENDAR_SLOTS = 7 + 31 + 52
RAW_INPUT_SIZE = INPUT_WINDOW + OUTPUT_WINDOW + 1 + CALENDAR_SLOTS
NET_OUTPUT_SIZE = 3 * OUTPUT_WINDOW + 2
DILATIONS = (2, 4, 7)


def validate_service_envs() -> None:
    missing = [
        name
        for name, val in {
            "STLF_CHECKPOINTS": CHECKPOINT_PATHS,
            "STLF_DATA_PATH": DATA_PATH,
        }.items()
        if not val
    ]
    if missing:
        raise RuntimeError(f"Missing required environment variables: {', '.join(missing)}")
