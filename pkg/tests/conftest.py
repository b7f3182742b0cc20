import numpy as np
import pytest

from sparsesel import DomainGrid, RangeModel, Scenario, assemble_atoms

T1_SENSORS = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])


def t1_scenario():
    return Scenario(T1_SENSORS, RangeModel(1.0, 0.0), DomainGrid(np.zeros((1, 2))))


@pytest.fixture
def t1():
    return assemble_atoms(t1_scenario())


def random_range_instance(seed, M=None, D=None):
    """Small random range-model instance with a threshold the full set meets."""
    from sparsesel import Constraint
    rng = np.random.default_rng(seed)
    M = M or int(rng.integers(6, 13))
    D = D or int(rng.integers(1, 5))
    sens = rng.uniform(-5, 5, (M, 2))
    pts = rng.uniform(-1, 1, (D, 2))
    eta = float(rng.choice([0.0, 2.0]))
    atoms = assemble_atoms(Scenario(sens, RangeModel(1.0, eta), DomainGrid(pts)))
    full = np.linalg.eigvalsh(atoms.sum(axis=0))[:, 0].min()
    return atoms, Constraint("mineig", float(rng.uniform(0.2, 0.6)) * full)
