"""Shared model builders and the acceptance verdict reporter."""
import numpy as np

from leurn.model import LeurnConfig, LeurnParams, init_params

ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    # capture-proof home for the one-line-per-criterion acceptance verdicts
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_model(n=2, d=1, k=3, task="binary", n_classes=None, r=0.0, seed=0):
    """Small randomly initialized model plus its config."""
    cfg = LeurnConfig(n_features=n, depth=d, regions=k, dropout=r, task=task,
                      n_classes=n_classes, seed=seed)
    return init_params(cfg), cfg


def hand_model():
    """One-feature depth-0 k=2 model with hand-set weights.

    x_std=0.5 lands in the upper bin: s=+0.5, e=0.5*tanh(0.3),
    logit=2.0*e+0.1. These closed forms are the oracle for several tests.
    """
    cfg = LeurnConfig(n_features=1, depth=0, regions=2, task="binary", seed=0)
    params = LeurnParams(tau0=np.array([0.3]),
                         head_weight=np.array([[2.0]]),
                         head_bias=np.array([0.1]))
    return params, cfg
