import logging
import os

from src.schemas import DifficultyTable

logger = logging.getLogger(__name__)

DEFAULT_TABLE_TRIALS = 20_000
DEFAULT_TABLE_SEED = 0

# Singleton table
_difficulty_table = None


def get_difficulty_table() -> DifficultyTable:
    """
    The difficulty table shared by every command.
    Loads ECCPOW_TABLE if set, otherwise estimates the default levels once.
    """
    global _difficulty_table
    if _difficulty_table is None:
        path = os.environ.get("ECCPOW_TABLE")
        if path:
            from src.loader import load_difficulty_table

            _difficulty_table = load_difficulty_table(path)
        else:
            from src.consensus import build_default_table

            trials = int(os.environ.get("ECCPOW_TABLE_TRIALS", DEFAULT_TABLE_TRIALS))
            logger.info("Estimating default difficulty table (%d trials per level)...", trials)
            _difficulty_table = build_default_table(trials=trials, rng_seed=DEFAULT_TABLE_SEED)
    return _difficulty_table


def reset_difficulty_table() -> None:
    global _difficulty_table
    _difficulty_table = None
