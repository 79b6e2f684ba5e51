"""Dense Pauli operators on the 2^N spin-1/2 Hilbert space.

Tensor slots follow the lexicographic lattice site order: site 0 is the
leftmost Kronecker factor, so basis index b assigns site i the bit
(b >> (N-1-i)) & 1, with bit value 0 meaning sigma^z eigenvalue +1.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import CapacityError

#: Hard cap on site count for dense operator construction (dim 2^14 = 16384).
QUANTUM_SITE_CAP = 14

AXES = ("x", "y", "z")

PAULI = {
    "x": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}

_ID2 = np.eye(2, dtype=complex)


def _check_sites(n_sites: int) -> None:
    if n_sites < 1:
        raise ValueError(f"need at least one site, got {n_sites}")
    if n_sites > QUANTUM_SITE_CAP:
        raise CapacityError(
            f"{n_sites} sites exceeds the dense-operator cap {QUANTUM_SITE_CAP}"
        )


def _check_axis(axis: str) -> None:
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}, got {axis!r}")


def pauli_site(n_sites: int, i: int, axis: str) -> np.ndarray:
    """Pauli operator on site i, identity elsewhere."""
    _check_sites(n_sites)
    _check_axis(axis)
    if not 0 <= i < n_sites:
        raise IndexError(f"site {i} out of range for {n_sites} sites")
    return pauli_product(n_sites, (i,), axis)


def pauli_product(n_sites: int, sites: Sequence[int], axis: str) -> np.ndarray:
    """Product of same-axis Pauli operators over a site set; empty set is identity."""
    _check_sites(n_sites)
    _check_axis(axis)
    site_set = set(int(i) for i in sites)
    if site_set and not site_set <= set(range(n_sites)):
        raise IndexError(f"sites {sorted(site_set)} out of range for {n_sites} sites")
    op = np.ones((1, 1), dtype=complex)
    for j in range(n_sites):
        op = np.kron(op, PAULI[axis] if j in site_set else _ID2)
    return op


def gauge_unitary(n_sites: int, axis: str, tau: Sequence[int]) -> np.ndarray:
    """Unitary implementing the spin gauge transformation for configuration tau.

    Equals the product of the axis Pauli over every site where tau is -1;
    tau identically +1 gives the identity.
    """
    tau = np.asarray(tau)
    if tau.shape != (n_sites,):
        raise ValueError(f"tau must have one entry per site, got shape {tau.shape}")
    if not np.all(np.abs(tau) == 1):
        raise ValueError("tau entries must be +1 or -1")
    flipped = [i for i in range(n_sites) if tau[i] == -1]
    return pauli_product(n_sites, flipped, axis)


def global_flip(n_sites: int, axis: str) -> np.ndarray:
    """Product of the axis Pauli over every site; a Hermitian involution."""
    return pauli_product(n_sites, range(n_sites), axis)
