"""Exact enumeration of the classical Ising model with per-order inverse
temperatures: the Nishimori-line reference model for the quantum checks."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .disorder import NishimoriData
from .errors import CapacityError
from .lattice import CLASSICAL_SITE_CAP, BondFamily

_CHUNK_BITS = 16


@dataclass(frozen=True)
class ClassicalModel:
    """Ising couplings K per bond with a p-dependent inverse temperature.

    The Boltzmann weight of a configuration is
    exp(sum_p beta_p sum_X K_{X,p} tau_X); betas enter only at weight time,
    so one coupling set serves several temperature vectors.
    """

    n_sites: int
    families: Mapping[int, BondFamily]
    couplings: Mapping[int, np.ndarray]
    betas: Mapping[int, float]

    def __post_init__(self):
        for p, family in self.families.items():
            if len(self.couplings[p]) != len(family.bonds):
                raise ValueError(f"coupling count mismatch for p={p}")
            if self.betas[p] < 0:
                raise ValueError(f"beta must be >= 0, got {self.betas[p]} for p={p}")


def classical_from_nishimori(
    nd: NishimoriData, families: Mapping[int, BondFamily], n_sites: int
) -> ClassicalModel:
    """The Nishimori-line classical model for a transformed disorder sample."""
    return ClassicalModel(
        n_sites=n_sites, families=dict(families), couplings=dict(nd.k), betas=dict(nd.betas)
    )


def _tau_block(start: int, count: int, n_sites: int) -> np.ndarray:
    """Spin values (+-1) for configuration indices [start, start+count).

    Site i reads bit (n_sites-1-i) of the index, bit 0 meaning spin +1; this
    matches the tensor-slot convention of the quantum operators.
    """
    idx = np.arange(start, start + count, dtype=np.int64)
    shifts = n_sites - 1 - np.arange(n_sites)
    bits = (idx[:, None] >> shifts[None, :]) & 1
    return 1.0 - 2.0 * bits


def _check_cap(n_sites: int) -> None:
    if n_sites > CLASSICAL_SITE_CAP:
        raise CapacityError(
            f"{n_sites} sites exceeds the classical enumeration cap {CLASSICAL_SITE_CAP}"
        )


def _term_arrays(model: ClassicalModel) -> tuple[np.ndarray, list[tuple[int, ...]]]:
    coeffs = []
    bonds: list[tuple[int, ...]] = []
    for p in sorted(model.families):
        beta = model.betas[p]
        for b, bond in enumerate(model.families[p].bonds):
            coeffs.append(beta * float(model.couplings[p][b]))
            bonds.append(bond)
    return np.array(coeffs), bonds


def _log_weights(tau: np.ndarray, coeffs: np.ndarray, bonds: list[tuple[int, ...]]) -> np.ndarray:
    w = np.zeros(tau.shape[0])
    for c, bond in zip(coeffs, bonds):
        if c != 0.0:
            w += c * np.prod(tau[:, bond], axis=1)
    return w


def product_expectations(
    model: ClassicalModel, site_sets: Sequence[Sequence[int]]
) -> np.ndarray:
    """Exact <prod_{i in S} tau_i> for each site set S, in one enumeration.

    Configurations are enumerated in fixed-size chunks in a fixed order, so
    results are bit-reproducible regardless of lattice size.
    """
    _check_cap(model.n_sites)
    sets = [tuple(int(i) for i in s) for s in site_sets]
    for s in sets:
        if s and not set(s) <= set(range(model.n_sites)):
            raise ValueError(f"site set {s} out of range")
    coeffs, bonds = _term_arrays(model)
    total = 1 << model.n_sites
    chunk = min(total, 1 << _CHUNK_BITS)
    gmax = -np.inf
    for start in range(0, total, chunk):
        tau = _tau_block(start, min(chunk, total - start), model.n_sites)
        gmax = max(gmax, float(np.max(_log_weights(tau, coeffs, bonds))))
    z = 0.0
    nums = np.zeros(len(sets))
    for start in range(0, total, chunk):
        tau = _tau_block(start, min(chunk, total - start), model.n_sites)
        w = np.exp(_log_weights(tau, coeffs, bonds) - gmax)
        z += float(np.sum(w))
        for k, s in enumerate(sets):
            if s:
                nums[k] += float(np.dot(np.prod(tau[:, s], axis=1), w))
            else:
                nums[k] += float(np.sum(w))
    return nums / z


def classical_energy(model: ClassicalModel, tau: Sequence[int]) -> float:
    """-sum_p sum_X K_{X,p} tau_X (inverse temperatures not applied here)."""
    tau = np.asarray(tau, dtype=float)
    if tau.shape != (model.n_sites,):
        raise ValueError(f"tau must have {model.n_sites} entries")
    energy = 0.0
    for p in sorted(model.families):
        for b, bond in enumerate(model.families[p].bonds):
            energy -= float(model.couplings[p][b]) * float(np.prod(tau[list(bond)]))
    return energy


def classical_expectation(model: ClassicalModel, sites: Sequence[int]) -> float:
    """Exact expectation of the spin product over `sites`."""
    return float(product_expectations(model, [tuple(sites)])[0])


def classical_pair_expectation(
    model: ClassicalModel, x_sites: Sequence[int], y_sites: Sequence[int]
) -> float:
    """<tau_X tau_Y>, reduced to the product over the symmetric difference."""
    diff = tuple(sorted(set(x_sites) ^ set(y_sites)))
    return classical_expectation(model, diff)


def classical_correlation_matrix(model: ClassicalModel) -> np.ndarray:
    """All pair correlations <tau_i tau_j> from a single enumeration pass."""
    _check_cap(model.n_sites)
    coeffs, bonds = _term_arrays(model)
    total = 1 << model.n_sites
    chunk = min(total, 1 << _CHUNK_BITS)
    gmax = -np.inf
    for start in range(0, total, chunk):
        tau = _tau_block(start, min(chunk, total - start), model.n_sites)
        gmax = max(gmax, float(np.max(_log_weights(tau, coeffs, bonds))))
    z = 0.0
    corr = np.zeros((model.n_sites, model.n_sites))
    for start in range(0, total, chunk):
        tau = _tau_block(start, min(chunk, total - start), model.n_sites)
        w = np.exp(_log_weights(tau, coeffs, bonds) - gmax)
        z += float(np.sum(w))
        corr += (tau * w[:, None]).T @ tau
    return corr / z


def correlation_matrix_to_csv(matrix: np.ndarray, path: str) -> None:
    """Write a correlation matrix as CSV with site-index headers."""
    n = matrix.shape[0]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["site"] + [str(j) for j in range(n)])
        for i in range(n):
            writer.writerow([str(i)] + [repr(float(v)) for v in matrix[i]])


class BondProductTable:
    """Precomputed configuration tables for fast repeated evaluation.

    Caches the full spin table and per-bond sign columns for one family
    structure, so that per-sample Nishimori expectations reduce to a matrix
    product plus a softmax. Limited to 16 sites; larger systems go through
    the chunked enumeration above.
    """

    def __init__(self, n_sites: int, families: Mapping[int, BondFamily]):
        if n_sites > 16:
            raise CapacityError("fast tables are limited to 16 sites")
        self.n_sites = n_sites
        self.families = dict(families)
        self.tau = _tau_block(0, 1 << n_sites, n_sites)
        cols = []
        self._slices: dict[int, slice] = {}
        pos = 0
        for p in sorted(families):
            bonds = families[p].bonds
            for bond in bonds:
                cols.append(np.prod(self.tau[:, bond], axis=1))
            self._slices[p] = slice(pos, pos + len(bonds))
            pos += len(bonds)
        self.term_signs = np.stack(cols, axis=1) if cols else np.zeros((1 << n_sites, 0))

    def probabilities(
        self, k_by_p: Mapping[int, np.ndarray], betas: Mapping[int, float]
    ) -> np.ndarray:
        coeff = np.empty(self.term_signs.shape[1])
        for p, sl in self._slices.items():
            coeff[sl] = betas[p] * np.asarray(k_by_p[p])
        logw = self.term_signs @ coeff
        w = np.exp(logw - np.max(logw))
        return w / np.sum(w)

    def expectations(
        self,
        k_by_p: Mapping[int, np.ndarray],
        betas: Mapping[int, float],
        site_sets: Sequence[Sequence[int]],
    ) -> np.ndarray:
        prob = self.probabilities(k_by_p, betas)
        out = np.empty(len(site_sets))
        for k, s in enumerate(site_sets):
            s = tuple(s)
            out[k] = float(np.dot(np.prod(self.tau[:, s], axis=1), prob)) if s else 1.0
        return out

    def pair_matrix(
        self, k_by_p: Mapping[int, np.ndarray], betas: Mapping[int, float]
    ) -> np.ndarray:
        """All <tau_i tau_j> for one sample."""
        prob = self.probabilities(k_by_p, betas)
        return (self.tau * prob[:, None]).T @ self.tau
