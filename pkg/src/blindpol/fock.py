"""Exact photon-number interference on a two-port, two-polarization beamsplitter.

The oracle expands products of creation operators through the beamsplitter
map and reads off Fock amplitudes, so it is independent of the coherent-state
code path it is used to check. Modes are ordered
``(port1 H, port1 V, port2 H, port2 V)``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .optics import FockPulse, ParameterError

N_MAX = 6
NORM_TOL = 1e-12

Monomial = tuple[int, int, int, int]


class CapacityError(ValueError):
    """Total photon number exceeds the oracle's truncation."""


@dataclass
class FockModeState:
    amplitudes: dict[Monomial, complex] = field(default_factory=dict)
    n_photons: int = 0

    def norm(self) -> float:
        return sum(abs(a) ** 2 for a in self.amplitudes.values())

    def port_distribution(self) -> dict[tuple[int, int], float]:
        """Photon counts per output port, summed over polarization."""
        n = self.n_photons
        dist = {(i, n - i): 0.0 for i in range(n + 1)}
        for occ, amp in self.amplitudes.items():
            dist[(occ[0] + occ[1], occ[2] + occ[3])] += abs(amp) ** 2
        return dist


def _multiply(poly: dict[Monomial, complex], linear: tuple[complex, ...]) -> dict[Monomial, complex]:
    out: dict[Monomial, complex] = {}
    for mono, coeff in poly.items():
        for j, c in enumerate(linear):
            if c == 0:
                continue
            key = mono[:j] + (mono[j] + 1,) + mono[j + 1:]
            out[key] = out.get(key, 0j) + coeff * c
    return out


def _to_state(poly: dict[Monomial, complex], prefactor: float, n: int) -> FockModeState:
    amps = {}
    for mono, coeff in poly.items():
        amp = coeff * prefactor * math.sqrt(math.prod(math.factorial(k) for k in mono))
        if abs(amp) > 1e-15:
            amps[mono] = amp
    return FockModeState(amps, n)


def _input_rows(r_amp: float) -> list[tuple[float, ...]]:
    """Output-mode expansion of the four input creation operators (aH, aV, bH, bV)."""
    if not 0.0 <= r_amp <= 1.0:
        raise ParameterError(f"beamsplitter reflectivity must lie in [0, 1], got {r_amp}")
    r = r_amp
    t = math.sqrt(1.0 - r * r)
    return [
        (t, 0.0, r, 0.0),
        (0.0, t, 0.0, r),
        (r, 0.0, -t, 0.0),
        (0.0, r, 0.0, -t),
    ]


def fock_output_state(a: FockPulse, b: FockPulse, r_amp: float = math.sqrt(0.5),
                      n_max: int = N_MAX) -> FockModeState:
    total = a.n + b.n
    if total > n_max:
        raise CapacityError(f"{total} photons exceed the oracle capacity of {n_max}")
    rows = _input_rows(r_amp)
    ca, sa = math.cos(a.pol), math.sin(a.pol)
    cb, sb = math.cos(b.pol), math.sin(b.pol)
    op_a = tuple(ca * h + sa * v for h, v in zip(rows[0], rows[1]))
    op_b = tuple(cb * h + sb * v for h, v in zip(rows[2], rows[3]))
    poly: dict[Monomial, complex] = {(0, 0, 0, 0): 1 + 0j}
    for _ in range(a.n):
        poly = _multiply(poly, op_a)
    for _ in range(b.n):
        poly = _multiply(poly, op_b)
    prefactor = 1.0 / math.sqrt(math.factorial(a.n) * math.factorial(b.n))
    return _to_state(poly, prefactor, total)


def beamsplit_fock_oracle(a: FockPulse, b: FockPulse, r_amp: float = math.sqrt(0.5),
                          n_max: int = N_MAX) -> dict[tuple[int, int], float]:
    """Exact output distribution over ``(port1 count, port2 count)``."""
    state = fock_output_state(a, b, r_amp, n_max)
    norm = state.norm()
    if abs(norm - 1.0) > NORM_TOL:
        raise ArithmeticError(f"oracle state norm drifted to {norm}")
    return state.port_distribution()


def basis_states(n: int) -> list[Monomial]:
    return [occ for occ in itertools.product(range(n + 1), repeat=4) if sum(occ) == n]


def fock_transfer_matrix(n: int, r_amp: float = math.sqrt(0.5)) -> np.ndarray:
    """Matrix of the beamsplitter on the ``n``-photon subspace of the four modes.

    Columns are indexed by input occupations, rows by output occupations, both
    in ``basis_states(n)`` order.
    """
    if n > N_MAX:
        raise CapacityError(f"{n} photons exceed the oracle capacity of {N_MAX}")
    basis = basis_states(n)
    index = {occ: i for i, occ in enumerate(basis)}
    rows = _input_rows(r_amp)
    mat = np.zeros((len(basis), len(basis)))
    for col, occ in enumerate(basis):
        poly: dict[Monomial, complex] = {(0, 0, 0, 0): 1 + 0j}
        for mode, count in enumerate(occ):
            for _ in range(count):
                poly = _multiply(poly, rows[mode])
        prefactor = 1.0 / math.sqrt(math.prod(math.factorial(k) for k in occ))
        for out_occ, amp in _to_state(poly, prefactor, n).amplitudes.items():
            mat[index[out_occ], col] = amp.real
    return mat


def sample_ports(dist: dict[tuple[int, int], float], rng: np.random.Generator) -> tuple[int, int]:
    keys = list(dist)
    probs = np.array([dist[k] for k in keys])
    u = rng.random() * probs.sum()
    acc = 0.0
    for key, p in zip(keys, probs):
        acc += p
        if u < acc:
            return key
    return keys[-1]
