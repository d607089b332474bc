import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

DEFAULT_DATA = Path("/root/data/mnist")


def mnist_dir():
    root = os.environ.get("OSCRES_DATA_DIR")
    if root:
        return Path(root)
    if (DEFAULT_DATA / "train-images-idx3-ubyte").exists():
        return DEFAULT_DATA
    return None


@pytest.fixture(scope="session")
def mnist_root():
    root = mnist_dir()
    if root is None or not (root / "train-images-idx3-ubyte").exists():
        pytest.skip("MNIST IDX files not found; set OSCRES_DATA_DIR")
    return root


ACCEPTANCE_LINES = []


def record_criterion(number, passed, detail):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
