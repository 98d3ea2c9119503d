"""Session-wide fixtures for the expensive decomposition runs.

The full scale split and the deep Taylor gap measurements take tens of
seconds each; several suites assert against the same outputs, so they are
computed once per session here.
"""

import pytest

from flagpp.decomposition import split_product, taylor_split
from flagpp.symbols import standard_symbols


@pytest.fixture(scope="session")
def catalog64():
    return standard_symbols(64)


@pytest.fixture(scope="session")
def homog_annular_split(catalog64):
    """Full three-way split of homog0 x annular3 at the default settings."""
    return split_product(catalog64["homog0"], catalog64["annular3"], 3)


@pytest.fixture(scope="session")
def taylor_remainder_sups():
    """Raw remainder sup norms keyed by (order, coarse scale).

    The ratio between consecutive coarse scales at fixed order is the
    two-scale contraction factor of the Taylor remainder.
    """
    sups = {}
    for order, coarse_pair in ((1, (-6, -7)), (2, (-6, -7)), (3, (-7, -8))):
        for kc in coarse_pair:
            ts = taylor_split(order, 0, kc)
            sups[(order, kc)] = ts.constant * 2.0 ** (kc * order)
    return sups
