"""
Configuration settings for the bklab reconstruction laboratory
"""
import os
from typing import Optional
from dotenv import load_dotenv

# Load environment variables
load_dotenv()


def _env_int(key: str, default: int) -> int:
    value = os.getenv(key)
    return int(value) if value not in (None, "") else default


class Config:
    """Application configuration class"""

    # Parallelism
    THREADS: int = max(1, _env_int("BKLAB_THREADS", os.cpu_count() or 1))

    # Application Settings
    OUTPUT_DIR: str = os.getenv("BKLAB_OUTPUT_DIR", "./output")
    LOG_DIR: str = os.getenv("BKLAB_LOG_DIR", "./logs")
    LOG_LEVEL: str = os.getenv("BKLAB_LOG_LEVEL", "INFO")

    # Run history
    DB_PATH: str = os.getenv("BKLAB_DB_PATH", "bklab.db")
    RECORD_HISTORY: bool = os.getenv("BKLAB_RECORD_HISTORY", "True").lower() == "true"

    # Engine defaults
    ENGINE: str = os.getenv("BKLAB_ENGINE", "spectral")
    MAX_INPUT_POINTS: int = _env_int("BKLAB_MAX_INPUT_POINTS", 64_000_000)

    # Averaging defaults
    N_ANGLES: int = _env_int("BKLAB_N_ANGLES", 64)
    N_SRAD: int = _env_int("BKLAB_N_SRAD", 128)
    N_RADII: int = _env_int("BKLAB_N_RADII", 512)
    FREQ_DEPTH: int = _env_int("BKLAB_FREQ_DEPTH", 3)
    SIGMA_COUNT: int = _env_int("BKLAB_SIGMA_COUNT", 16)

    # Experiment protocol (200 x 200 = 40,000 output pixels, 800 x 800 input)
    OUTPUT_SIZE: int = _env_int("BKLAB_OUTPUT_SIZE", 200)
    INPUT_REFINEMENT: int = _env_int("BKLAB_INPUT_REFINEMENT", 4)

    # Optional location of user phantom presets
    PRESET_DIR: Optional[str] = os.getenv("BKLAB_PRESET_DIR")

    @classmethod
    def ensure_directories(cls):
        """Create necessary directories if they don't exist"""
        os.makedirs(cls.OUTPUT_DIR, exist_ok=True)
        os.makedirs(cls.LOG_DIR, exist_ok=True)


# Initialize configuration
config = Config()
