import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mgramp import io  # noqa: E402
from mgramp.instance import (AdjustableLoad, DispatchableUnit, FixedProfiles,  # noqa: E402
                             GridLink, MicrogridInstance, StorageUnit, TimeGrid)


def make_instance(load, gen=None, price=None, limit=20.0, units=(), storage=(), loads=(),
                  initial_exchange=None):
    T = len(load)
    gen = gen if gen is not None else [0.0] * T
    price = price if price is not None else [50.0] * T
    return MicrogridInstance(TimeGrid(T, 1.0), FixedProfiles(tuple(map(float, load)),
                                                             tuple(map(float, gen))),
                             GridLink(float(limit), tuple(map(float, price)), initial_exchange),
                             tuple(units), tuple(storage), tuple(loads))


@pytest.fixture(scope="session")
def bundled():
    return io.load_instance("bundled")


@pytest.fixture(scope="session")
def feeder():
    return io.load_feeder("bundled")


@pytest.fixture
def small():
    """Three periods: one unit, one storage, one adjustable load."""
    unit = DispatchableUnit("G", 1.0, 6.0, marginal_cost=30.0, ramp_up=3.0, ramp_down=3.0,
                            no_load_cost=2.0, startup_cost=10.0, min_up=2, min_down=1)
    store = StorageUnit("S", p_dch_max=2.0, p_ch_max=2.0, cap_max=6.0, initial_energy=3.0,
                        efficiency=0.9)
    load = AdjustableLoad("L", (0.0,) * 3, (2.0,) * 3, energy=3.0, window_start=1, window_end=3)
    return make_instance([8, 10, 9], gen=[1, 0, 2], price=[40, 60, 45], limit=10,
                         units=[unit], storage=[store], loads=[load])
