import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import torusperc as tp


@pytest.fixture(scope="session")
def T_h():
    return tp.builtin("T_h")


@pytest.fixture(scope="session")
def T_s():
    return tp.builtin("T_s")


@pytest.fixture(scope="session")
def T_s_refined():
    return tp.builtin("T_s_refined")


@pytest.fixture(scope="session")
def tri_embedding(T_h):
    """Regular triangular site lattice: balanced honeycomb at its isotropic modulus."""
    em = tp.balanced_embedding(T_h, tp.alpha_rw(T_h))
    return em


@pytest.fixture(scope="session")
def triangle_domain(tri_embedding):
    """Small equilateral-triangle domain with corner marks, for quick tests."""
    a, b, c = 0j, 1 + 0j, 0.5 + 1j * np.sqrt(3) / 2
    return tp.discretize(tri_embedding, [a, b, c], 0.08, [a, b, c])
