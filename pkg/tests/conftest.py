import pytest

import ctcdisc


@pytest.fixture(name='bb84', scope='module')
def fixture_bb84():
    return ctcdisc.bb84_problem()
