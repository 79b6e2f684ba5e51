"""Hamiltonian assembly, spectral decomposition, and thermal observables:
Gibbs expectations, Duhamel correlation functions, and the field-derivative
identity, all evaluated exactly in the eigenbasis."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.integrate import simpson
from scipy.linalg import expm
from scipy.special import logsumexp

from .disorder import DisorderSample
from .errors import CapacityError
from .lattice import BondFamily, Lattice
from .operators import AXES, QUANTUM_SITE_CAP, pauli_product, pauli_site, global_flip

#: Relative tolerance budget for eigendecomposition self-checks.
SPECTRUM_TOL = 1e-10

#: Precompute the per-term operator stack only below this memory footprint.
_STACK_BYTE_LIMIT = 1 << 27


@dataclass(frozen=True)
class Spectrum:
    """Eigendecomposition of a Hermitian operator, eigenvalues ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    dim: int


@dataclass(frozen=True)
class ThermalState:
    """A spectrum together with inverse temperature and shifted Boltzmann weights.

    Weights are exp(-beta (E_n - E_min)), so log_Z is recovered through
    log-sum-exp without overflow at large beta.
    """

    spectrum: Spectrum
    beta: float
    log_z: float
    weights: np.ndarray


class HamiltonianBuilder:
    """Assembles H = -sum_{p,X,w} J_{X,p}^w sigma_X^w for many samples.

    Term operators are precomputed and stacked when they fit in memory;
    otherwise each build constructs them on the fly (identical H either way).
    """

    def __init__(self, lattice: Lattice, families: Mapping[int, BondFamily]):
        n = lattice.n_sites
        if n > QUANTUM_SITE_CAP:
            raise CapacityError(
                f"{n} sites exceeds the quantum cap {QUANTUM_SITE_CAP}"
            )
        self.n_sites = n
        self.dim = 2**n
        self.terms: list[tuple[int, str, int, tuple[int, ...]]] = []
        for p in sorted(families):
            for axis in AXES:
                for b, bond in enumerate(families[p].bonds):
                    self.terms.append((p, axis, b, bond))
        self._stack: np.ndarray | None = None
        if len(self.terms) * self.dim**2 * 16 <= _STACK_BYTE_LIMIT:
            self._stack = np.stack(
                [pauli_product(n, bond, axis) for (_, axis, _, bond) in self.terms]
            )

    def coupling_vector(self, sample: DisorderSample) -> np.ndarray:
        return np.array(
            [sample.value(p, axis, b) for (p, axis, b, _) in self.terms]
        )

    def build(self, sample: DisorderSample) -> np.ndarray:
        j = self.coupling_vector(sample)
        if self._stack is not None:
            return -np.tensordot(j, self._stack, axes=1)
        h = np.zeros((self.dim, self.dim), dtype=complex)
        for val, (_, axis, _, bond) in zip(j, self.terms):
            if val != 0.0:
                h -= val * pauli_product(self.n_sites, bond, axis)
        return h


def build_hamiltonian(
    lattice: Lattice, families: Mapping[int, BondFamily], sample: DisorderSample
) -> np.ndarray:
    """One-shot Hamiltonian assembly from a disorder sample."""
    return HamiltonianBuilder(lattice, families).build(sample)


def spectral_decompose(h: np.ndarray) -> Spectrum:
    """Eigendecompose a Hermitian matrix, verifying the result.

    Rejects non-Hermitian input, and rejects decompositions whose
    reconstruction or orthonormality residual exceeds the tolerance budget
    rather than silently accepting them.
    """
    h = np.asarray(h)
    dim = h.shape[0]
    scale = max(1.0, float(np.max(np.abs(h))) if h.size else 0.0)
    if np.max(np.abs(h - h.conj().T)) > 1e-12 * scale:
        raise ValueError("matrix is not Hermitian")
    evals, evecs = np.linalg.eigh(h)
    recon = (evecs * evals) @ evecs.conj().T
    if np.max(np.abs(recon - h)) > SPECTRUM_TOL * scale:
        raise ArithmeticError("eigendecomposition reconstruction residual too large")
    gram = evecs.conj().T @ evecs
    if np.max(np.abs(gram - np.eye(dim))) > SPECTRUM_TOL:
        raise ArithmeticError("eigenvectors are not orthonormal within tolerance")
    return Spectrum(eigenvalues=evals, eigenvectors=evecs, dim=dim)


def thermal_state(spectrum: Spectrum, beta: float) -> ThermalState:
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    e = spectrum.eigenvalues
    weights = np.exp(-beta * (e - e[0]))
    log_z = float(logsumexp(-beta * (e - e[0])) - beta * e[0])
    return ThermalState(spectrum=spectrum, beta=beta, log_z=log_z, weights=weights)


def _to_eigenbasis(state: ThermalState, a: np.ndarray) -> np.ndarray:
    v = state.spectrum.eigenvectors
    if a.shape != (state.spectrum.dim, state.spectrum.dim):
        raise ValueError(f"operator shape {a.shape} does not match dim {state.spectrum.dim}")
    return v.conj().T @ a @ v


def _real_part(value: complex, what: str) -> float:
    if abs(value.imag) > 1e-10 * max(1.0, abs(value.real)):
        raise ValueError(f"{what} has non-negligible imaginary part {value.imag}")
    return float(value.real)


def gibbs_expectation(state: ThermalState, a: np.ndarray) -> float:
    """Thermal expectation (1/Z) Tr[A exp(-beta H)] in the eigenbasis."""
    diag = np.einsum("ji,jk,ki->i", state.spectrum.eigenvectors.conj(), a,
                     state.spectrum.eigenvectors)
    val = np.dot(diag, state.weights) / np.sum(state.weights)
    return _real_part(complex(val), "Gibbs expectation")


def _duhamel_kernel(state: ThermalState) -> np.ndarray:
    """Matrix phi_mn such that the Duhamel bracket is sum A_mn B_nm phi_mn / Z.

    phi_mn = (exp(-beta E_n) - exp(-beta E_m)) / (beta (E_m - E_n)), written
    as exp(-s) sinh(x)/x with s, x the scaled mean and half-difference of the
    shifted energies. Near degeneracy (and at beta = 0) the cancellation-free
    series exp(-s)(1 + x^2/6) takes over; its leading term is the midpoint
    form exp(-beta(E_m+E_n)/2).
    """
    e = state.spectrum.eigenvalues - state.spectrum.eigenvalues[0]
    a = state.beta * e
    s = 0.5 * (a[:, None] + a[None, :])
    x = 0.5 * (a[:, None] - a[None, :])
    small = np.abs(x) < 1e-4
    x_safe = np.where(small, 1.0, x)
    direct = (np.exp(x - s) - np.exp(-x - s)) / (2.0 * x_safe)
    series = np.exp(-s) * (1.0 + x * x / 6.0)
    return np.where(small, series, direct)


def duhamel(state: ThermalState, a: np.ndarray, b: np.ndarray) -> float:
    """Duhamel correlation: the t-average over [0,1] of
    < exp(t beta H) A exp(-t beta H) B >, evaluated spectrally."""
    at = _to_eigenbasis(state, a)
    bt = _to_eigenbasis(state, b)
    phi = _duhamel_kernel(state)
    val = np.sum(at * bt.T * phi) / np.sum(state.weights)
    return _real_part(complex(val), "Duhamel bracket")


def truncated_duhamel(state: ThermalState, a: np.ndarray, b: np.ndarray) -> float:
    """Duhamel bracket minus the product of thermal expectations."""
    return duhamel(state, a, b) - gibbs_expectation(state, a) * gibbs_expectation(state, b)


def free_energy_density(state: ThermalState, volume: int) -> float:
    """log Z per site (overflow-safe through shifted weights)."""
    return state.log_z / volume


def order_expectation(state: ThermalState, axis: str) -> float:
    """Expectation of the order operator: the site-averaged axis Pauli."""
    n = state.spectrum.dim.bit_length() - 1
    total = np.zeros((state.spectrum.dim, state.spectrum.dim), dtype=complex)
    for i in range(n):
        total += pauli_site(n, i, axis)
    return gibbs_expectation(state, total) / n


def z2_commutator_norm(h: np.ndarray, axis: str) -> float:
    """Max-norm of the commutator of H with the global axis flip."""
    n = h.shape[0].bit_length() - 1
    u = global_flip(n, axis)
    return float(np.max(np.abs(h @ u - u @ h)))


def derivative_identity_residual(
    lattice: Lattice,
    families: Mapping[int, BondFamily],
    sample: DisorderSample,
    beta: float,
    f: np.ndarray,
    axis: str,
    h: float,
) -> float:
    """Gap between the central-difference field derivative of <f> and the
    linear-response form beta |Lambda| (f ; o^axis).

    Shifting the uniform field mean by +-h shifts every single-site coupling
    on that axis, which is the rank-one perturbation -+ h sum_i sigma_i^axis.
    """
    if h <= 0:
        raise ValueError(f"step h must be > 0, got {h}")
    n = lattice.n_sites
    ham = build_hamiltonian(lattice, families, sample)
    field = np.zeros_like(ham)
    for i in range(n):
        field += pauli_site(n, i, axis)
    plus = gibbs_expectation(thermal_state(spectral_decompose(ham - h * field), beta), f)
    minus = gibbs_expectation(thermal_state(spectral_decompose(ham + h * field), beta), f)
    central = (plus - minus) / (2.0 * h)
    state = thermal_state(spectral_decompose(ham), beta)
    response = beta * n * truncated_duhamel(state, f, field / n)
    return abs(central - response)


def _gershgorin_shift(h: np.ndarray) -> np.ndarray:
    """Shift H by a lower spectral bound so exp(-beta H) cannot overflow."""
    lower = float(np.min(np.diag(h).real - (np.sum(np.abs(h), axis=1) - np.abs(np.diag(h)))))
    return h - lower * np.eye(h.shape[0])


def gibbs_expectation_expm(h: np.ndarray, beta: float, a: np.ndarray) -> float:
    """Cross-check path for Gibbs expectations via scaling-and-squaring expm,
    independent of the eigendecomposition route."""
    rho = expm(-beta * _gershgorin_shift(h))
    return float((np.trace(a @ rho) / np.trace(rho)).real)


def duhamel_time_integral(
    h: np.ndarray, beta: float, a: np.ndarray, b: np.ndarray, num_intervals: int = 200
) -> float:
    """Cross-check path for the Duhamel bracket: Simpson integration of the
    defining imaginary-time integral using expm only."""
    hs = _gershgorin_shift(h)
    rho = expm(-beta * hs)
    z = np.trace(rho)
    ts = np.linspace(0.0, 1.0, num_intervals + 1)
    vals = np.empty_like(ts)
    for k, t in enumerate(ts):
        grow = expm(t * beta * hs)
        shrink = expm(-t * beta * hs)
        vals[k] = (np.trace(grow @ a @ shrink @ b @ rho) / z).real
    return float(simpson(vals, x=ts))
