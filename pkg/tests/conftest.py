import numpy as np
import pytest

from cfjoint import Hyperparams, TrialDataset


def random_instance(rng, d=None, n_control=None, n_treatment=None, noise=0.1):
    """A random trial whose control and treatment predictors differ a little."""
    d = d or int(rng.integers(2, 8))
    n_control = n_control or int(rng.integers(20, 120))
    n_treatment = n_treatment or int(rng.integers(2, 30))
    w_t = rng.standard_normal(d)
    w_delta = 0.3 * rng.standard_normal(d)
    Xc = rng.standard_normal((n_control, d))
    Xt = rng.standard_normal((n_treatment, d))
    yc = Xc @ (w_t + w_delta) + noise * rng.standard_normal(n_control)
    yt = Xt @ w_t + noise * rng.standard_normal(n_treatment)
    return TrialDataset(Xc, yc, Xt, yt)


def random_hyperparams(rng, gamma=None):
    g = float(rng.uniform(0.05, 0.95)) if gamma is None else gamma
    return Hyperparams(gamma=g, lam=float(10 ** rng.uniform(-3, 2)),
                       eta=float(10 ** rng.uniform(-3, 2)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = []


def report_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
