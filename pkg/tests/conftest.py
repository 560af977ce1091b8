import os
import sys
from typing import Callable, Generator

import pytest

# Ensure src module is importable
sys.path.append(os.getcwd())

GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "golden")


def pytest_addoption(parser):
    parser.addoption(
        "--update-golden",
        action="store_true",
        default=False,
        help="rewrite tests/golden/ from the current library output",
    )


@pytest.fixture
def golden(request) -> Callable[[str, str], None]:
    """
    Compare text against tests/golden/<name>.
    With --update-golden the file is (re)written instead.
    """
    update = request.config.getoption("--update-golden")

    def check(name: str, text: str) -> None:
        path = os.path.join(GOLDEN_DIR, name)
        if update:
            os.makedirs(GOLDEN_DIR, exist_ok=True)
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            return
        if not os.path.exists(path):
            pytest.skip(f"golden file {name} missing; run pytest --update-golden")
        with open(path, encoding="utf-8") as fh:
            assert text == fh.read()

    return check


@pytest.fixture
def small_params():
    from src.schemas import LdpcParams

    return LdpcParams(n=16, wc=3, wr=4)


def geometric_table(levels: int = 40, first: float = 0.1, ratio: float = 0.8):
    """Stand-in difficulty table with p_k = first * ratio^k; simnet never decodes."""
    from src.schemas import DifficultyLevel, DifficultyTable, LdpcParams

    return DifficultyTable(
        levels=[
            DifficultyLevel(params=LdpcParams(n=16 + 4 * k, wc=3, wr=4), success_prob=first * ratio**k)
            for k in range(levels)
        ]
    )


@pytest.fixture
def stand_in_table():
    return geometric_table()


@pytest.fixture
def pinned_table(stand_in_table) -> Generator:
    """Make deps.get_difficulty_table() return the stand-in table."""
    from src import deps

    deps.reset_difficulty_table()
    deps._difficulty_table = stand_in_table
    yield stand_in_table
    deps.reset_difficulty_table()
