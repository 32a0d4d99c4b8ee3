import pytest

import sepscan as sp


@pytest.fixture(scope="session")
def bilinear_engine():
    return sp.AnovaOracle(sp.make_builtin("bilinear"))


@pytest.fixture(scope="session")
def sphere3_engine():
    return sp.AnovaOracle(sp.make_builtin("sphere", 3))


@pytest.fixture(scope="session")
def paper5_engine():
    # 16 nodes keep the 5-d grid around a million points; plenty for 1e-10
    # tolerances on these smooth integrands.
    return sp.AnovaOracle(sp.make_builtin("paper5"), sp.GaussLegendreRule(16))
