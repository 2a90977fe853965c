"""Exact small-N operator dynamics at finite chemical potential.

Hilbert space: ``N`` spinless fermionic modes, basis states indexed by an
integer ``x`` whose most significant bit is site 0.  Fermion operators use a
Jordan-Wigner string over the lower-indexed sites.

The grand-canonical inner product is ``(A|B) = tr(sqrt(rho) A^dag sqrt(rho) B)``
with ``rho ~ exp(-mu Q)``, so ``nbar = 1 / (1 + e^mu)``.  Because ``sqrt(rho)`` is
diagonal it enters only as the weights ``r_x``: ``(A|B) = sum_xy r_y r_x
conj(A_yx) B_yx``.

The size basis consists of the ``4^N`` products (site-ascending) of
single-site factors ``1, c, c^dag, n - nbar`` with sizes ``0, 1, 1, 2``.
"""
from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .lattice import as_stream

__all__ = [
    "DEFAULT_MAX_SITES",
    "HARD_MAX_SITES",
    "MuEnsemble",
    "FockOperator",
    "annihilation",
    "creation",
    "number",
    "total_charge",
    "identity",
    "inner_product",
    "SizeBasis",
    "size_basis",
    "SizeDistribution",
    "size_distribution",
    "sample_syk_couplings",
    "build_syk_hamiltonian",
    "heisenberg_evolve",
    "Spectrum",
    "liouvillian_block",
    "block_bound_report",
    "otoc_exact_and_sumrule",
    "write_size_table",
]

DEFAULT_MAX_SITES = 6
HARD_MAX_SITES = 8

LABELS = ("1", "c", "cd", "n")
SITE_SIZE = np.array([0, 1, 1, 2])


def _check_sites(n_sites: int, allow_large: bool = False) -> None:
    cap = HARD_MAX_SITES if allow_large else DEFAULT_MAX_SITES
    if not 1 <= n_sites <= cap:
        hint = "" if allow_large or n_sites > HARD_MAX_SITES else " (pass allow_large=True for up to 8)"
        raise ValueError(f"exact module supports 1 <= N <= {cap}, got {n_sites}{hint}")


@dataclass(frozen=True)
class MuEnsemble:
    mu: float
    n_sites: int

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise ValueError("mu must be finite")
        if self.n_sites < 1:
            raise ValueError("n_sites must be positive")

    @property
    def nbar(self) -> float:
        return 1.0 / (1.0 + math.exp(self.mu))

    @property
    def variance(self) -> float:
        """``nbar (1 - nbar)``, evaluated without cancellation at large ``|mu|``."""
        e = math.exp(-abs(self.mu))
        return e / (1.0 + e) ** 2

    @property
    def dim(self) -> int:
        return 1 << self.n_sites

    def charges(self) -> np.ndarray:
        x = np.arange(self.dim)
        return np.array([bin(v).count("1") for v in x], dtype=np.int64)

    def weights(self) -> np.ndarray:
        """Diagonal of ``sqrt(rho)``."""
        q = self.charges()
        # log-space normalization avoids overflow at large |mu|
        log_z = self.n_sites * np.logaddexp(0.0, -self.mu)
        return np.exp(-0.5 * self.mu * q - 0.5 * log_z)

    def weight_matrix(self) -> np.ndarray:
        r = self.weights()
        return np.outer(r, r)


@dataclass(frozen=True)
class FockOperator:
    """Dense operator on the ``2^N`` Fock space; ``charge`` is the change of ``Q``."""

    matrix: np.ndarray
    n_sites: int
    charge: int | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        d = 1 << self.n_sites
        if m.shape != (d, d):
            raise ValueError(f"matrix must be {d}x{d} for {self.n_sites} sites")
        object.__setattr__(self, "matrix", m)

    def __matmul__(self, other: "FockOperator") -> "FockOperator":
        _same_space(self, other)
        ch = None if self.charge is None or other.charge is None else self.charge + other.charge
        return FockOperator(self.matrix @ other.matrix, self.n_sites, ch)

    def __add__(self, other: "FockOperator") -> "FockOperator":
        _same_space(self, other)
        ch = self.charge if self.charge == other.charge else None
        return FockOperator(self.matrix + other.matrix, self.n_sites, ch)

    def __sub__(self, other: "FockOperator") -> "FockOperator":
        _same_space(self, other)
        ch = self.charge if self.charge == other.charge else None
        return FockOperator(self.matrix - other.matrix, self.n_sites, ch)

    def __mul__(self, scalar) -> "FockOperator":
        return FockOperator(self.matrix * scalar, self.n_sites, self.charge)

    __rmul__ = __mul__

    @property
    def dag(self) -> "FockOperator":
        ch = None if self.charge is None else -self.charge
        return FockOperator(self.matrix.conj().T, self.n_sites, ch)

    def commutator(self, other: "FockOperator") -> "FockOperator":
        return self @ other - other @ self


def _same_space(a: FockOperator, b: FockOperator) -> None:
    if a.n_sites != b.n_sites:
        raise ValueError(f"operators act on {a.n_sites} and {b.n_sites} sites")


_A = np.array([[0.0, 1.0], [0.0, 0.0]])
_Z = np.diag([1.0, -1.0])
_N = np.diag([0.0, 1.0])


def _site_op(n_sites: int, j: int, local: np.ndarray, jw: bool) -> np.ndarray:
    if not 0 <= j < n_sites:
        raise IndexError(f"site {j} out of range for {n_sites} sites")
    out = np.ones((1, 1))
    for l in range(n_sites):
        if l < j and jw:
            f = _Z
        elif l == j:
            f = local
        else:
            f = np.eye(2)
        out = np.kron(out, f)
    return out


def annihilation(n_sites: int, j: int) -> FockOperator:
    return FockOperator(_site_op(n_sites, j, _A, True), n_sites, -1)


def creation(n_sites: int, j: int) -> FockOperator:
    return FockOperator(_site_op(n_sites, j, _A.T, True), n_sites, 1)


def number(n_sites: int, j: int) -> FockOperator:
    return FockOperator(_site_op(n_sites, j, _N, False), n_sites, 0)


def identity(n_sites: int) -> FockOperator:
    return FockOperator(np.eye(1 << n_sites), n_sites, 0)


def total_charge(n_sites: int) -> FockOperator:
    q = MuEnsemble(0.0, n_sites).charges()
    return FockOperator(np.diag(q.astype(float)), n_sites, 0)


def inner_product(a: FockOperator, b: FockOperator, ens: MuEnsemble) -> complex:
    """``(A|B) = tr(sqrt(rho) A^dag sqrt(rho) B)``."""
    _same_space(a, b)
    if a.n_sites != ens.n_sites:
        raise ValueError("ensemble and operators have different sizes")
    return complex(np.sum(ens.weight_matrix() * a.matrix.conj() * b.matrix))


class SizeBasis:
    """The ``4^N`` orthogonal operator strings at chemical potential ``mu``.

    Every string maps each basis state ``x`` to at most one state, so it is
    stored as ``target[S, x]`` and ``amplitude[S, x]`` (zero when annihilated).
    String ``S`` has site labels given by its base-4 digits, site 0 first.
    """

    def __init__(self, ens: MuEnsemble, allow_large: bool = False):
        n = ens.n_sites
        _check_sites(n, allow_large)
        self.ensemble = ens
        self.n_sites = n
        n_str, dim = 4 ** n, 1 << n
        digits = np.arange(n_str)[:, None] // (4 ** np.arange(n - 1, -1, -1))[None, :] % 4
        self.labels = digits.astype(np.int8)
        self.sizes = SITE_SIZE[digits].sum(axis=1)
        nbar = ens.nbar
        var = ens.variance
        site_len = np.array([1.0, math.sqrt(var), math.sqrt(var), var])
        self.lengths = np.prod(site_len[digits], axis=1)
        x = np.arange(dim)
        target = np.broadcast_to(x, (n_str, dim)).copy()
        amp = np.ones((n_str, dim))
        for j in range(n - 1, -1, -1):
            mask = 1 << (n - 1 - j)
            lab = digits[:, j][:, None]
            occ = ((target & mask) != 0).astype(float)
            # sites < j still hold their original occupations
            below = x >> (n - j)
            sign = np.where(np.array([bin(v).count("1") for v in below]) % 2, -1.0, 1.0)[None, :]
            amp = np.where(lab == 3, amp * (occ - nbar), amp)
            amp = np.where(lab == 1, amp * occ * sign, amp)
            amp = np.where(lab == 2, amp * (1 - occ) * sign, amp)
            flip = (lab == 1) | (lab == 2)
            target = np.where(flip, target ^ mask, target)
        amp[amp == 0] = 0.0
        self.target = target
        self.amplitude = amp
        r = ens.weights()
        self._rw = r[target] * r[None, :] * amp

    @property
    def n_strings(self) -> int:
        return self.labels.shape[0]

    def label(self, index: int) -> tuple:
        return tuple(LABELS[d] for d in self.labels[index])

    def index(self, labels) -> int:
        lookup = {name: a for a, name in enumerate(LABELS)}
        idx = 0
        for name in labels:
            idx = 4 * idx + lookup[name]
        return idx

    def string_matrix(self, index: int) -> FockOperator:
        dim = 1 << self.n_sites
        m = np.zeros((dim, dim))
        x = np.arange(dim)
        m[self.target[index], x] = self.amplitude[index]
        return FockOperator(m, self.n_sites)

    def overlaps(self, a: FockOperator) -> np.ndarray:
        """``(T_S|A)`` for every string ``S``."""
        if a.n_sites != self.n_sites:
            raise ValueError("operator and basis have different sizes")
        x = np.arange(1 << self.n_sites)
        return np.sum(self._rw * a.matrix[self.target, x[None, :]], axis=1)

    def coefficients(self, a: FockOperator) -> np.ndarray:
        return self.overlaps(a) / self.lengths

    def block(self, size: int) -> np.ndarray:
        idx = np.flatnonzero(self.sizes == size)
        if idx.size == 0:
            raise ValueError(f"no operator strings of size {size} on {self.n_sites} sites")
        return idx


@lru_cache(maxsize=16)
def _cached_basis(mu: float, n_sites: int, allow_large: bool) -> SizeBasis:
    return SizeBasis(MuEnsemble(mu, n_sites), allow_large)


def size_basis(ens: MuEnsemble, allow_large: bool = False) -> SizeBasis:
    return _cached_basis(float(ens.mu), ens.n_sites, allow_large)


def explicit_string(ens: MuEnsemble, labels) -> FockOperator:
    """Dense product of site factors; the slow reference for :class:`SizeBasis`."""
    n = ens.n_sites
    out = identity(n)
    for j, name in enumerate(labels):
        if name == "c":
            f = annihilation(n, j)
        elif name == "cd":
            f = creation(n, j)
        elif name == "n":
            f = number(n, j) - identity(n) * ens.nbar
        elif name == "1":
            continue
        else:
            raise ValueError(f"unknown site label {name!r}")
        out = out @ f
    return out


@dataclass(frozen=True)
class SizeDistribution:
    probabilities: np.ndarray
    mu: float

    @property
    def sizes(self) -> np.ndarray:
        return np.arange(self.probabilities.size)

    @property
    def mean(self) -> float:
        return float(np.dot(self.sizes, self.probabilities))

    @property
    def total(self) -> float:
        return float(self.probabilities.sum())


def size_distribution(a: FockOperator, ens: MuEnsemble, allow_large: bool = False) -> SizeDistribution:
    """``P_s = sum_{size S = s} |a_S|^2 (T_S|T_S) / (A|A)``."""
    basis = size_basis(ens, allow_large)
    norm = inner_product(a, a, ens).real
    if norm <= 0:
        raise ValueError("operator has zero length")
    ov = basis.overlaps(a)
    weight = np.abs(ov) ** 2 / basis.lengths
    probs = np.bincount(basis.sizes, weights=weight, minlength=2 * ens.n_sites + 1) / norm
    return SizeDistribution(probs, ens.mu)


def write_size_table(path, times, distributions) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "s", "P_s"])
        for t, dist in zip(times, distributions):
            for s, p in enumerate(dist.probabilities):
                w.writerow([repr(float(t)), s, repr(float(p))])


def _subsets(n_sites: int, m: int):
    return list(itertools.combinations(range(n_sites), m))


def sample_syk_couplings(n_sites: int, q: int, J: float, rng) -> np.ndarray:
    """Couplings ``J[I, J]`` over ordered ``q/2``-subsets.

    ``E|J_IJ|^2 = J^2 (q/2 - 1)! (q/2)! / N^(q-1)``, with the Hermiticity
    constraint ``J_JI = (-1)^(q/2) conj(J_IJ)``.
    """
    if q % 2:
        raise ValueError(f"q must be even, got {q}")
    if q < 2 or q > 2 * n_sites:
        raise ValueError(f"need 2 <= q <= 2N, got q={q}, N={n_sites}")
    m = q // 2
    var = J ** 2 * math.factorial(m - 1) * math.factorial(m) / n_sites ** (q - 1)
    n_sub = math.comb(n_sites, m)
    gen = as_stream(rng).generator()
    sd = math.sqrt(var / 2)
    z = gen.normal(0.0, sd, (n_sub, n_sub)) + 1j * gen.normal(0.0, sd, (n_sub, n_sub))
    sign = (-1) ** m
    out = np.triu(z, 1)
    out = out + sign * np.conj(out.T)
    diag = gen.normal(0.0, math.sqrt(var), n_sub)
    np.fill_diagonal(out, diag if m % 2 == 0 else 1j * diag)
    return out


def build_syk_hamiltonian(n_sites: int, q: int, J: float, rng, *, couplings=None,
                          allow_large: bool = False) -> FockOperator:
    """``H = i^(q/2) sum_{I,J} J_IJ c^dag_I c_J`` with ``c_J = c_j1 ... c_jm`` (ascending)."""
    if q % 2:
        raise ValueError(f"q must be even, got {q}")
    _check_sites(n_sites, allow_large)
    if q < 2 or q > 2 * n_sites:
        raise ValueError(f"need 2 <= q <= 2N, got q={q}, N={n_sites}")
    m = q // 2
    jmat = sample_syk_couplings(n_sites, q, J, rng) if couplings is None else np.asarray(couplings)
    subsets = _subsets(n_sites, m)
    c = [annihilation(n_sites, j).matrix for j in range(n_sites)]
    cd = [creation(n_sites, j).matrix for j in range(n_sites)]
    ann = [np.linalg.multi_dot([c[j] for j in s]) if m > 1 else c[s[0]] for s in subsets]
    cre = [np.linalg.multi_dot([cd[j] for j in s]) if m > 1 else cd[s[0]] for s in subsets]
    ann_stack = np.array(ann)
    h = np.zeros_like(ann[0], dtype=complex)
    for a, ci in enumerate(cre):
        h += ci @ np.tensordot(jmat[a], ann_stack, axes=1)
    h *= 1j ** m
    return FockOperator(h, n_sites, 0)


@dataclass(frozen=True)
class Spectrum:
    energies: np.ndarray
    vectors: np.ndarray

    @classmethod
    def of(cls, h: FockOperator, tol: float = 1e-10) -> "Spectrum":
        m = h.matrix
        scale = max(1.0, float(np.abs(m).max()))
        if np.abs(m - m.conj().T).max() > tol * scale:
            raise ValueError("Hamiltonian is not Hermitian")
        e, v = np.linalg.eigh(m)
        return cls(e, v)

    def propagator(self, t: float) -> np.ndarray:
        return (self.vectors * np.exp(-1j * self.energies * t)) @ self.vectors.conj().T


def heisenberg_evolve(a: FockOperator, h: FockOperator | Spectrum, t: float) -> FockOperator:
    """``A(t) = e^{iHt} A e^{-iHt}`` via the eigendecomposition of ``H``."""
    spec = h if isinstance(h, Spectrum) else Spectrum.of(h)
    if spec.vectors.shape != a.matrix.shape:
        raise ValueError("operator and Hamiltonian dimensions differ")
    u = spec.propagator(t)
    return FockOperator(u.conj().T @ a.matrix @ u, a.n_sites, a.charge)


def liouvillian_block(h: FockOperator, s: int, s_prime: int, ens: MuEnsemble,
                      allow_large: bool = False) -> np.ndarray:
    """``Q_s L Q_s'`` with ``L = i[H, .]`` in the unit-length size basis at ``ens.mu``."""
    basis = size_basis(ens, allow_large)
    rows = basis.block(s)
    cols = basis.block(s_prime)
    hm = h.matrix
    norms = np.sqrt(basis.lengths)
    out = np.empty((rows.size, cols.size), dtype=complex)
    x = np.arange(1 << ens.n_sites)
    for b, col in enumerate(cols):
        t = basis.string_matrix(col).matrix / norms[col]
        lt = 1j * (hm @ t - t @ hm)
        ov = np.sum(basis._rw[rows] * lt[basis.target[rows], x[None, :]], axis=1)
        out[:, b] = ov / norms[rows]
    return out


def block_bound_report(h: FockOperator, s: int, s_prime: int, mus, *, rel_tol: float = 1e-9,
                       allow_large: bool = False) -> dict:
    """Largest singular value of ``Q_s L Q_s'`` against its ``mu = 0`` value.

    The bound at ``mu`` is ``norm(mu=0) / sqrt(cosh(mu/2)^|s - s'|)``; any
    measured norm above it by more than ``rel_tol`` (relative) is flagged.
    """
    n = h.n_sites

    def norm_at(mu):
        blk = liouvillian_block(h, s, s_prime, MuEnsemble(float(mu), n), allow_large)
        return float(np.linalg.norm(blk, 2)) if blk.size else 0.0

    ref = norm_at(0.0)
    entries = []
    for mu in mus:
        measured = norm_at(mu)
        factor = 1.0 / math.sqrt(math.cosh(mu / 2) ** abs(s - s_prime))
        bound = ref * factor
        violated = measured > bound * (1 + rel_tol) + 1e-14
        entries.append({
            "mu": float(mu), "norm": measured, "bound": bound, "bound_factor": factor,
            "ratio": measured / bound if bound > 0 else 0.0, "violation": bool(violated),
        })
    return {"s": s, "s_prime": s_prime, "n_sites": n, "norm_mu0": ref, "entries": entries,
            "violations": sum(e["violation"] for e in entries)}


def otoc_exact_and_sumrule(h: FockOperator | Spectrum, j: int, t: float, ens: MuEnsemble,
                           allow_large: bool = False) -> dict:
    """``C_ij(t)`` for every ``i``, the size expectation of ``c_j(t)`` and their slack.

    ``C_ij = ([n_i, c_j(t)] | [n_i, c_j(t)]) / (c_j|c_j)``; the size expectation
    ``(c_j(t)|S|c_j(t)) / (c_j|c_j)`` bounds ``sum_i C_ij`` from above.
    """
    n = ens.n_sites
    cj = annihilation(n, j)
    norm = inner_product(cj, cj, ens).real
    cjt = heisenberg_evolve(cj, h, t)
    c_ij = np.empty(n)
    for i in range(n):
        com = number(n, i).commutator(cjt)
        c_ij[i] = inner_product(com, com, ens).real / norm
    size = size_distribution(cjt, ens, allow_large).mean
    return {"t": float(t), "mu": ens.mu, "j": j, "C": c_ij.tolist(), "sum_C": float(c_ij.sum()),
            "size": size, "slack": size - float(c_ij.sum())}


def report_json(obj, path=None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text
