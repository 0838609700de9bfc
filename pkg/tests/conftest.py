import numpy as np
import pytest

ACCEPTANCE = {}
TITLES = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(n, title): acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    n, title = mark.args
    TITLES[n] = title
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        ok = rep.passed
        ACCEPTANCE[n] = ACCEPTANCE.get(n, True) and ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status = "PASS" if ACCEPTANCE[n] else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {TITLES[n]}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_state(rng, dim, decay=0.7, parity=None):
    """Random pure state with geometrically decaying amplitudes."""
    env = decay ** np.arange(dim)
    c = (rng.normal(size=dim) + 1j * rng.normal(size=dim)) * env
    if parity == "even":
        c[1::2] = 0
    elif parity == "odd":
        c[0::2] = 0
    return c / np.linalg.norm(c)


def random_density(rng, dim, rank=3, decay=0.7):
    vs = [random_state(rng, dim, decay) for _ in range(rank)]
    w = rng.random(rank)
    w /= w.sum()
    return sum(wi * np.outer(v, v.conj()) for wi, v in zip(w, vs))
