import numpy as np
import pytest
import torch

from haifit.core import TrainConfig, make_schedule
from haifit.losses import load_test_extractor


@pytest.fixture(scope="session", autouse=True)
def single_thread():
    torch.set_num_threads(1)


# one line per release criterion, echoed after the run summary
acceptance_lines: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if acceptance_lines:
        terminalreporter.write_line("")
        terminalreporter.write_line("acceptance criteria:")
        for line in acceptance_lines:
            terminalreporter.write_line(f"  {line}")


@pytest.fixture(scope="session")
def extractor():
    return load_test_extractor()


@pytest.fixture(scope="session")
def extractor64():
    return load_test_extractor(dtype=torch.float64)


@pytest.fixture
def tiny_config():
    return TrainConfig(schedule=make_schedule(32, 64), batch_size=2, seed=3,
                       epochs_per_stage=1, max_epochs=2)


def rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-12)


def fd_grad(f, tensor: torch.Tensor, index: tuple, eps: float = 1e-4) -> float:
    """Central finite difference of scalar f() w.r.t. one tensor element."""
    with torch.no_grad():
        orig = tensor[index].item()
        tensor[index] = orig + eps
        hi = f()
        tensor[index] = orig - eps
        lo = f()
        tensor[index] = orig
    return (hi - lo) / (2 * eps)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
