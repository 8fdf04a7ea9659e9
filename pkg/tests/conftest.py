import numpy as np
import pytest

from asgdlab import (ProblemInstance, derive_from_alpha, derive_overparam,
                     make_spectrum)


@pytest.fixture(scope="session")
def paper_spectrum():
    return make_spectrum("polynomial", 2000, exponent=2.0)


@pytest.fixture(scope="session")
def paper_hp(paper_spectrum):
    return derive_from_alpha(0.1, 0.9875, 5, 3.0, paper_spectrum)


@pytest.fixture(scope="session")
def paper_sgd_hp(paper_spectrum):
    return derive_overparam(0.1, 0.1, 5, 3.0, paper_spectrum)


def paper_instance(paper_spectrum, w0_index=20, coef=10.0, noise=0.01):
    d = paper_spectrum.d
    w0 = np.zeros(d)
    w0[w0_index - 1] = coef
    return ProblemInstance(paper_spectrum, np.zeros(d), w0, noise, 3.0)


@pytest.fixture(scope="session")
def paper_inst_e20(paper_spectrum):
    return paper_instance(paper_spectrum, 20)
