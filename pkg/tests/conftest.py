import numpy as np
import pytest

from arofraud.dataset import GeneratorConfig, generate_splits

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_config():
    # 700 / 300 records, same 70/30 and ~3.7% fraud shape as the reference splits
    return GeneratorConfig(train_legit=674, train_fraud=26, test_legit=289, test_fraud=11, seed=7)


@pytest.fixture(scope="session")
def small_split(small_config):
    return generate_splits(small_config, 1)[0]


@pytest.fixture(scope="session")
def ds1_split():
    return generate_splits(GeneratorConfig(seed=2024), 1)[0]
