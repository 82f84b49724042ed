from pathlib import Path

import pytest

REPO = Path(__file__).resolve().parent.parent


@pytest.fixture(scope="session")
def demo_model_path() -> Path:
    return REPO / "models" / "demo_exam.json"


@pytest.fixture(scope="session")
def unsat_model_path() -> Path:
    return REPO / "models" / "unsat_exam.json"


@pytest.fixture(scope="session")
def demo_bank_path() -> Path:
    return REPO / "models" / "demo_bank.csv"
