import pathlib

import pytest

from robovalid import sim, stl
from robovalid.tasks import Grammar
from robovalid.theory import enumerate_initial_worlds, load_model

ROOT = pathlib.Path(__file__).resolve().parent.parent
MODELS = ROOT / "models"


@pytest.fixture(scope="session")
def kitchen():
    return load_model(MODELS / "kitchen4.sc")


@pytest.fixture(scope="session")
def kitchen_grammar(kitchen):
    return Grammar(kitchen.grammar)


@pytest.fixture(scope="session")
def kitchen_worlds(kitchen):
    return list(enumerate_initial_worlds(kitchen))


@pytest.fixture(scope="session")
def putfrag():
    return load_model(MODELS / "putfrag.sc")


@pytest.fixture(scope="session")
def putfrag_grammar(putfrag):
    return Grammar(putfrag.grammar)


@pytest.fixture(scope="session")
def pmap():
    return stl.load_pmap(MODELS / "kitchen4.pmap")


@pytest.fixture(scope="session")
def scenario():
    return sim.load_scenario(MODELS / "kitchen4_scenario.json")


@pytest.fixture(scope="session")
def fault_scenario(scenario):
    # doorTorqueLimit pinned below the 80-degree stall point
    return sim.Scenario(scenario.objects, scenario.workspace,
                        dict(scenario.policy_ranges, doorTorqueLimit=(0.3, 0.3)))
