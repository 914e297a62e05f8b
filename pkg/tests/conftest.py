from pathlib import Path

import pytest

from clozeprobe.templates import load_templates

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def templates():
    return load_templates()
