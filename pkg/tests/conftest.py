import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def synthetic_dir(tmp_path_factory):
    from mricnn import synthetic

    root = tmp_path_factory.mktemp("synthetic")
    synthetic.write_dataset(root, n_per_class=50, seed=0)
    return root


@pytest.fixture
def tiny_dir(tmp_path):
    """Ten 12x14 PGM images spread over the four class folders."""
    from mricnn import synthetic
    from mricnn.dataset import CLASS_NAMES
    from mricnn.imageio import write_pgm

    gen = np.random.default_rng(5)
    counts = (3, 3, 2, 2)
    for label, (name, k) in enumerate(zip(CLASS_NAMES, counts)):
        (tmp_path / name).mkdir()
        for i in range(k):
            write_pgm(tmp_path / name / f"img{i}.pgm", synthetic.pattern(label, (12, 14), gen))
    return tmp_path


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
