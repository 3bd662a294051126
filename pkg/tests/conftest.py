import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def random_hermitian(rng, p, scale=1.0):
    A = rng.standard_normal((p, p)) + 1j * rng.standard_normal((p, p))
    return scale * (A + A.conj().T) / 2


def random_psd(rng, p, rank=None):
    k = p if rank is None else rank
    A = rng.standard_normal((p, k)) + 1j * rng.standard_normal((p, k))
    return A @ A.conj().T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one-line verdicts collected by the acceptance suite, echoed after the run
VERDICTS = []


def record_verdict(number, name, passed, detail):
    line = f"criterion {number} {name}: {'PASS' if passed else 'FAIL'} ({detail})"
    VERDICTS.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
