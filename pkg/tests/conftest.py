"""Shared fixtures.

The default-configuration training run takes a few minutes, so it runs once
per session and is shared by every test that needs a converged model.
"""

from types import SimpleNamespace

import pytest

from ilfo import training as tr


@pytest.fixture(scope="session")
def trained_run(tmp_path_factory):
    """Full two-stage training at the default configuration.

    Returns the config, the run directory (checkpoints, log, online states)
    and the in-memory TrainResult.
    """
    run_dir = tmp_path_factory.mktemp("default_run") / "run"
    config = tr.ExperimentConfig()
    result = tr.train(config, run_dir=run_dir)
    return SimpleNamespace(config=config, run_dir=run_dir, result=result)
