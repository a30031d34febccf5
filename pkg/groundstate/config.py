"""Process-level settings for the ground-state toolkit."""

from pathlib import Path
import os


class Settings:
    """Application settings."""

    # Logging
    LOG_LEVEL: str = os.getenv("GROUNDSTATE_LOG_LEVEL", "INFO")
    LOG_FORMAT: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    # Output tree (reports, field dumps, scan tables)
    OUTPUT_DIR: Path = Path(os.getenv("GROUNDSTATE_OUTPUT_DIR", "./output"))

    # Worker pool for multistart runs and parameter scans (1 = sequential)
    WORKERS: int = int(os.getenv("GROUNDSTATE_WORKERS", "1"))

    # ==========================================================================
    # Numerical tolerances
    # ==========================================================================
    # Relative quadrature tolerance used by the rearrangement audits
    TAU_QUAD: float = float(os.getenv("GROUNDSTATE_TAU_QUAD", "1e-6"))

    # Band constant C in "tau_quad + C*h" for gradient / product comparisons
    PS_BAND: float = float(os.getenv("GROUNDSTATE_PS_BAND", "2.0"))

    # Default truncation radius is R_FACTOR / sqrt(min lambda_i)
    DEFAULT_R_FACTOR: float = float(os.getenv("GROUNDSTATE_DEFAULT_R_FACTOR", "20.0"))
    DEFAULT_CELLS: int = int(os.getenv("GROUNDSTATE_DEFAULT_CELLS", "4000"))

    # Full precision for diff-stable CSV output
    FLOAT_FORMAT: str = "%.17g"

    # Only this run-config schema is understood
    SCHEMA_VERSION: int = 1

    @classmethod
    def ensure_directories(cls, base: Path | None = None) -> Path:
        """Create the output directory if it doesn't exist."""
        directory = Path(base) if base is not None else cls.OUTPUT_DIR
        directory.mkdir(parents=True, exist_ok=True)
        return directory


settings = Settings()
