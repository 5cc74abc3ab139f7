import random

import pytest

from privloc import paillier


@pytest.fixture(scope="session")
def key_512():
    return paillier.keygen(512, random.Random(0xC0FFEE))


@pytest.fixture(scope="session")
def key_128():
    # small key for protocol-structure tests where crypto strength is moot
    return paillier.keygen(128, random.Random(0xBEEF))


@pytest.fixture(scope="session")
def toy_key():
    return paillier.keypair_from_primes(5, 7)
