"""
JointFace — Configuration
Process-level settings for the library and CLI.

All settings load from environment variables with safe defaults for development.
Per-run parameters (epochs, seeds, paths) live in the run configs of
`jointface.cli.run_config`; this module only holds what is ambient to a process.
"""
import os
from functools import lru_cache

try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    pass


class Settings:
    def __init__(self):
        self.ENVIRONMENT = os.getenv("JOINTFACE_ENV", "development")

        # === Logging ===
        self.LOG_LEVEL = os.getenv("JOINTFACE_LOG_LEVEL", "info").lower()
        self.LOG_JSON = os.getenv("JOINTFACE_LOG_JSON", "0").lower() in ("1", "true", "yes")

        # === Feature Cache ===
        # Empty string disables the MFQ1 cache.
        self.FEATURE_CACHE_DIR = os.getenv("JOINTFACE_FEATURE_CACHE", "")

        # === Compute ===
        self.TORCH_THREADS = int(os.getenv("JOINTFACE_TORCH_THREADS", "0"))
        self.WORKERS = max(1, int(os.getenv("JOINTFACE_WORKERS", "1")))

    @property
    def is_production(self) -> bool:
        return self.ENVIRONMENT == "production"

    @property
    def feature_cache_enabled(self) -> bool:
        return bool(self.FEATURE_CACHE_DIR)


@lru_cache()
def get_settings() -> Settings:
    return Settings()


settings = get_settings()


# === Full-size face rig ===
FRAME_RATE = 25
SAMPLE_RATE = 16000
MEL_CHANNELS = 128
TEXT_DIM = 768
FULL_VERTEX_COUNT = 23370
FULL_SPEAKERS = 6
