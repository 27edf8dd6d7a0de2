import itertools
import math

import numpy as np
import pytest

from blindpol.fock import (
    N_MAX,
    CapacityError,
    basis_states,
    beamsplit_fock_oracle,
    fock_output_state,
    fock_transfer_matrix,
    sample_ports,
)
from blindpol.optics import FockPulse, ParameterError, hom_coincidence_prob


def permanent(m):
    n = len(m)
    if n == 0:
        return 1.0
    return sum(math.prod(m[i][p[i]] for i in range(n)) for p in itertools.permutations(range(n)))


def single_mode_unitary(r):
    t = math.sqrt(1 - r * r)
    # input modes (aH, aV, bH, bV) -> output modes (1H, 1V, 2H, 2V)
    return np.array([[t, 0, r, 0], [0, t, 0, r], [r, 0, -t, 0], [0, r, 0, -t]])


def permanent_amplitude(u, occ_in, occ_out):
    """<out| U |in> via the permanent of the repeated-row/column submatrix."""
    rows = [i for i, k in enumerate(occ_in) for _ in range(k)]
    cols = [j for j, k in enumerate(occ_out) for _ in range(k)]
    sub = [[u[r][c] for c in cols] for r in rows]
    norm = math.sqrt(math.prod(math.factorial(k) for k in occ_in) * math.prod(math.factorial(k) for k in occ_out))
    return permanent(sub) / norm


def test_hom_parallel():
    d = beamsplit_fock_oracle(FockPulse(1, 0.0), FockPulse(1, 0.0))
    assert d[(2, 0)] == pytest.approx(0.5)
    assert d[(0, 2)] == pytest.approx(0.5)
    assert d[(1, 1)] == pytest.approx(0.0, abs=1e-15)


def test_hom_orthogonal():
    d = beamsplit_fock_oracle(FockPulse(1, 0.0), FockPulse(1, math.pi / 2))
    assert d == pytest.approx({(0, 2): 0.25, (1, 1): 0.5, (2, 0): 0.25})


def test_two_one_amplitudes():
    state = fock_output_state(FockPulse(2, 0.0), FockPulse(1, 0.0))
    amps = {(occ[0], occ[2]): a.real for occ, a in state.amplitudes.items()}
    expected = np.array([math.sqrt(6), math.sqrt(2), -math.sqrt(2), -math.sqrt(6)]) / 4
    got = np.array([amps[(3, 0)], amps[(2, 1)], amps[(1, 2)], amps[(0, 3)]])
    np.testing.assert_allclose(got, expected, atol=1e-14)
    d = state.port_distribution()
    assert d[(1, 2)] + d[(2, 1)] == pytest.approx(0.25)


@pytest.mark.parametrize("delta", np.linspace(0, math.pi, 16, endpoint=False))
def test_coincidence_matches_closed_form(delta):
    d = beamsplit_fock_oracle(FockPulse(1, 0.3), FockPulse(1, 0.3 + delta))
    assert d[(1, 1)] == pytest.approx(hom_coincidence_prob(delta), abs=1e-12)


@pytest.mark.parametrize("n", range(1, N_MAX + 1))
def test_transfer_matrix_unitary(n):
    u = fock_transfer_matrix(n)
    assert u.T @ u == pytest.approx(np.eye(len(u)), abs=1e-10)
    u = fock_transfer_matrix(n, r_amp=0.3)
    assert u.T @ u == pytest.approx(np.eye(len(u)), abs=1e-10)


@pytest.mark.parametrize("n, r", [(1, math.sqrt(0.5)), (2, math.sqrt(0.5)), (3, 0.3), (4, math.sqrt(0.1))])
def test_transfer_matrix_matches_permanents(n, r):
    u1 = single_mode_unitary(r)
    basis = basis_states(n)
    mat = fock_transfer_matrix(n, r)
    for col, occ_in in enumerate(basis):
        for row, occ_out in enumerate(basis):
            assert mat[row, col] == pytest.approx(permanent_amplitude(u1, occ_in, occ_out), abs=1e-12)


def test_normalization_all_inputs():
    for a in range(N_MAX + 1):
        for b in range(N_MAX + 1 - a):
            for pol in (0.0, 0.4, math.pi / 2):
                d = beamsplit_fock_oracle(FockPulse(a, 0.0), FockPulse(b, pol), r_amp=0.6)
                assert sum(d.values()) == pytest.approx(1.0, abs=1e-10)


def test_capacity_and_extension():
    with pytest.raises(CapacityError):
        beamsplit_fock_oracle(FockPulse(4), FockPulse(3))
    d = beamsplit_fock_oracle(FockPulse(4), FockPulse(3), n_max=7)
    assert sum(d.values()) == pytest.approx(1.0)


def test_reflectivity_range():
    with pytest.raises(ParameterError):
        beamsplit_fock_oracle(FockPulse(1), FockPulse(1), r_amp=1.5)


def test_sample_ports_frequencies(rng):
    d = beamsplit_fock_oracle(FockPulse(2, 0.0), FockPulse(1, 0.0))
    n = 40_000
    samples = [sample_ports(d, rng) for _ in range(n)]
    both = sum(1 for i, j in samples if i and j) / n
    assert abs(both - 0.25) <= 3 * math.sqrt(0.25 * 0.75 / n)
