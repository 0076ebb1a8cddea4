import pytest

from lampwalk.construction import Config, Construction


@pytest.fixture(scope="session")
def mini_asym():
    c = Construction("asymmetric", "mini")
    c.build_to(2)
    return c


@pytest.fixture(scope="session")
def mini_sym():
    c = Construction("symmetric", "mini")
    c.build_to(2)
    return c


@pytest.fixture(scope="session")
def mini_asym_small():
    # window size frozen at 1: the smallest oracle-friendly mini instance
    c = Construction("asymmetric", "mini", Config(brute_verify=False, mini_box_cap=1))
    c.build_to(2)
    return c


@pytest.fixture(scope="session")
def mini_sym_small():
    c = Construction("symmetric", "mini", Config(brute_verify=False, mini_box_cap=1))
    c.build_to(2)
    return c


@pytest.fixture(scope="session")
def paper_asym():
    c = Construction("asymmetric", "paper")
    c.build_to(3)
    return c
