import json
from importlib import resources

import numpy as np
import pytest

from certlq.config import load_config
from certlq.riccati import solve_gare


@pytest.fixture(scope="session")
def demo_cfg():
    """The shipped three-state / two-scalar-input benchmark scenario."""
    return load_config("example")


@pytest.fixture(scope="session")
def demo_spec(demo_cfg):
    return demo_cfg.spec


@pytest.fixture(scope="session")
def truth_sol(demo_spec, demo_cfg):
    return solve_gare(demo_spec.truth, demo_spec.cost, demo_cfg.solver)


@pytest.fixture(scope="session")
def golden():
    text = resources.files("certlq").joinpath("data", "example_game_golden.json").read_text()
    data = json.loads(text)
    return {
        "P": np.array(data["P"]),
        "K": np.array(data["K"]),
        "L": np.array(data["L"]),
        "margin": data["margin"],
        "rho_cl": data["rho_cl"],
        "j_star": data["j_star"],
    }
