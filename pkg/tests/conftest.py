import numpy as np
import pytest

from lldpm.partition import enumerate_partitions, eppf_log_prob


def row_codes(labels: np.ndarray) -> np.ndarray:
    labels = np.atleast_2d(labels)
    n = labels.shape[1]
    return labels @ (n ** np.arange(n))


def empirical_law(labels: np.ndarray, parts) -> np.ndarray:
    """Frequencies of each enumerated partition among the rows of ``labels``."""
    n = len(parts[0].labels)
    index = {int(row_codes(np.array(p.labels))[0]): i for i, p in enumerate(parts)}
    codes, counts = np.unique(row_codes(labels), return_counts=True)
    out = np.zeros(len(parts))
    for c, k in zip(codes, counts):
        out[index[int(c)]] += k
    assert out.sum() == labels.reshape(-1, n).shape[0]
    return out / out.sum()


def exact_law(n, g):
    parts = enumerate_partitions(n)
    return parts, np.exp([eppf_log_prob(p, g) for p in parts])


def tv(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
