import os

import pytest

from surfscft.mesh import build_icosphere
from surfscft.scft import ScftParams, scft_solve, spot_fields

FULL = os.environ.get("SURFSCFT_FULL") == "1"


def pytest_collection_modifyitems(config, items):
    if FULL:
        return
    skip = pytest.mark.skip(reason="full-scale run; set SURFSCFT_FULL=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def spotted_pilot():
    """Converged spotted phase on a small sphere (level 2, p = 2, r = 3.56)."""
    mesh = build_icosphere(2, 3.56, 2)
    params = ScftParams(chi_n=25, f=0.2, n_t=60, max_iter=400, tol_H=1e-6)
    res = scft_solve(mesh, params, spot_fields(mesh.nodes, 25, 0.2))
    return mesh, params, res
