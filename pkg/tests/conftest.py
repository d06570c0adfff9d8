import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


def rejection_cap_sample(axis, epsilon, rng, size):
    """Uniform-by-area cap sampler built by rejection from the whole sphere.

    Independent of the inverse-CDF construction used by the package.
    """
    axis = np.asarray(axis, dtype=float)
    out = []
    need = size
    while need > 0:
        v = rng.standard_normal((max(4 * need, 1024), 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        keep = v[1.0 - v @ axis <= epsilon]
        out.append(keep[:need])
        need -= len(out[-1])
    return np.concatenate(out)


# Acceptance outcomes, filled by tests/test_acceptance.py and echoed at the end of the session.
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
