import numpy as np
import pytest

from pixelmimo.channel import dbm_to_watts, power_from_snr, sample_virtual_channel
from pixelmimo.network import synthesize_antenna_model
from pixelmimo.solvers import Problem


def make_problem(S=2, n_t=2, n_r=2, K=4, seed=0, snr_db=0.0):
    """Seeded instance: one synthesized model per side, one channel draw."""
    ss = np.random.SeedSequence(seed).generate_state(3)
    model_t = synthesize_antenna_model(S, K, int(ss[0]))
    model_r = synthesize_antenna_model(S, K, int(ss[1]))
    vc = sample_virtual_channel(K, seed=int(ss[2]))
    sigma2 = dbm_to_watts(-90.0)
    return Problem(model_t, model_r, vc.H_V, power_from_snr(snr_db, sigma2, vc.beta),
                   sigma2, n_t, n_r)


def all_bits(n):
    """Every binary vector of length ``n`` in lexicographic order."""
    return ((np.arange(1 << n)[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(np.int8)


@pytest.fixture
def problem_s2():
    return make_problem(S=2, seed=11)
