import math
from fractions import Fraction

import numpy as np
import pytest

from lpreceiver import JointSystem, bpsk, hamming_7_4, proakis_b

H, A, B = Fraction(1, 2), Fraction(2, 3), Fraction(1, 3)

# Edge distributions q[i][d0 d1 d2] of the four reference points of the
# Hamming/Proakis-B system, and the codewords they are measured from.
KAPPA = {
    1: {1: {"100": 1}, 2: {"110": 1}, 3: {"011": H, "111": H}, 4: {"011": H, "101": H},
        5: {"010": H, "101": H}, 6: {"010": H, "101": H}, 7: {"010": H, "101": H}},
    2: {1: {"100": 1}, 2: {"010": A, "110": B}, 3: {"101": A, "011": B}, 4: {"010": A, "101": B},
        5: {"101": A, "010": B}, 6: {"010": A, "001": B}, 7: {"001": A, "100": B}},
    3: {1: {"000": 1}, 2: {"000": 1}, 3: {"000": H, "100": H}, 4: {"010": H, "100": H},
        5: {"010": H, "101": H}, 6: {"010": H, "101": H}, 7: {"010": H, "101": H}},
    4: {1: {"000": 1}, 2: {"100": A, "000": B}, 3: {"010": A, "100": B}, 4: {"101": A, "010": B},
        5: {"010": A, "101": B}, 6: {"101": A, "110": B}, 7: {"110": A, "011": B}},
}
CODEWORDS = {1: (1, 1, 1, 0, 1, 0, 0), 2: (1, 1, 0, 1, 0, 0, 1), 3: (0, 0, 0, 1, 0, 1, 1), 4: (0, 0, 1, 0, 1, 1, 0)}
ROOT6 = math.sqrt(6)


def kappa_q(i):
    return {pos: {d: Fraction(w) for d, w in dist.items()} for pos, dist in KAPPA[i].items()}


@pytest.fixture(scope="session")
def system():
    return JointSystem.get(hamming_7_4(), proakis_b(0.0), bpsk())


@pytest.fixture(scope="session")
def kappas(system):
    return {i: system.point_from_edges(kappa_q(i)) for i in KAPPA}


@pytest.fixture(scope="session")
def codeword_configs(system):
    return {i: system.configuration(c) for i, c in CODEWORDS.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
