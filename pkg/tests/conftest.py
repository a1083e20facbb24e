import pytest

from biopuf import hashing, optics


@pytest.fixture(scope="session")
def puf():
    return optics.mint_puf(42)


@pytest.fixture(scope="session")
def challenge():
    return optics.make_challenge(7)


@pytest.fixture(scope="session")
def pattern(puf, challenge):
    return optics.render_speckle(puf, challenge)


@pytest.fixture(scope="session")
def kernel(pattern):
    return hashing.default_kernel(pattern)


@pytest.fixture(scope="session")
def key(pattern, kernel):
    return hashing.hash_speckle(pattern, kernel)
