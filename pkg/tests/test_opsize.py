import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from u1scramble import opsize
from u1scramble.lattice import RngStream
from u1scramble.opsize import (
    FockOperator,
    MuEnsemble,
    SizeBasis,
    annihilation,
    block_bound_report,
    build_syk_hamiltonian,
    creation,
    explicit_string,
    heisenberg_evolve,
    identity,
    inner_product,
    liouvillian_block,
    number,
    otoc_exact_and_sumrule,
    sample_syk_couplings,
    size_basis,
    size_distribution,
    total_charge,
    write_size_table,
)


def dense_inner(a, b, mu):
    # tr(sqrt(rho) A^dag sqrt(rho) B) with rho built as a matrix exponential
    q = total_charge(a.n_sites).matrix
    rho = expm(-mu * q)
    rho /= np.trace(rho)
    root = expm(-0.5 * mu * q) / math.sqrt(np.trace(expm(-mu * q)).real)
    assert np.allclose(root @ root, rho)
    return np.trace(root @ a.matrix.conj().T @ root @ b.matrix)


@pytest.fixture(scope="module")
def h6():
    return build_syk_hamiltonian(6, 4, 1.0, RngStream(1, ("h6",)))


def test_ensemble_basics():
    assert MuEnsemble(0.0, 3).nbar == 0.5
    for mu in np.random.default_rng(0).uniform(-10, 10, 1000):
        e = MuEnsemble(mu, 1)
        assert math.exp(-mu / 2) / (1 + math.exp(-mu)) == pytest.approx(
            math.sqrt(e.nbar * (1 - e.nbar)), rel=1e-12)
    for mu in (-40.0, 40.0):
        assert MuEnsemble(mu, 1).variance == pytest.approx(math.exp(-40.0), rel=1e-12)
    r = MuEnsemble(2.0, 4).weights()
    assert np.sum(r ** 2) == pytest.approx(1.0, abs=1e-14)
    assert np.all(np.isfinite(MuEnsemble(500.0, 4).weights()))


def test_jordan_wigner_anticommutation():
    n = 4
    for i, j in itertools.product(range(n), repeat=2):
        ci, cj = annihilation(n, i).matrix, annihilation(n, j).matrix
        cdj = creation(n, j).matrix
        assert np.allclose(ci @ cdj + cdj @ ci, np.eye(16) * (i == j))
        assert np.allclose(ci @ cj + cj @ ci, 0)
    assert np.allclose(number(n, 2).matrix, (creation(n, 2) @ annihilation(n, 2)).matrix)


def test_inner_product_examples():
    for mu in (0.0, 1.3, -2.0):
        assert inner_product(identity(3), identity(3), MuEnsemble(mu, 3)) == pytest.approx(1.0)
    assert inner_product(annihilation(2, 0), annihilation(2, 0), MuEnsemble(0.0, 2)) == pytest.approx(0.5)
    ens = MuEnsemble(2.0, 2)
    d = number(2, 1) - identity(2) * ens.nbar
    assert inner_product(d, d, ens).real == pytest.approx(math.exp(-2) / (1 + math.exp(-2)) ** 2, abs=1e-12)
    assert inner_product(d, d, ens).real == pytest.approx(0.104994, abs=1e-6)
    with pytest.raises(ValueError):
        inner_product(identity(2), identity(3), ens)


@given(st.floats(-4, 4), st.integers(0, 2**31))
@settings(max_examples=25, deadline=None)
def test_inner_product_matches_trace_formula(mu, seed):
    gen = np.random.default_rng(seed)
    a = FockOperator(gen.normal(size=(8, 8)) + 1j * gen.normal(size=(8, 8)), 3)
    b = FockOperator(gen.normal(size=(8, 8)) + 1j * gen.normal(size=(8, 8)), 3)
    ens = MuEnsemble(mu, 3)
    assert inner_product(a, b, ens) == pytest.approx(dense_inner(a, b, mu), rel=1e-10, abs=1e-12)
    assert inner_product(b, a, ens) == pytest.approx(np.conj(inner_product(a, b, ens)), abs=1e-12)
    assert inner_product(a, a, ens).real >= 0


@pytest.mark.parametrize("n, mu", [(1, 0.7), (2, 0.0), (3, -1.5), (4, 2.0)])
def test_size_basis_orthogonal_exhaustive(n, mu):
    ens = MuEnsemble(mu, n)
    basis = SizeBasis(ens)
    gram = np.array([basis.overlaps(basis.string_matrix(b)) for b in range(basis.n_strings)]).T
    assert np.allclose(gram, np.diag(basis.lengths), atol=1e-14)


@pytest.mark.parametrize("n", [5, 6])
def test_size_basis_orthogonal_sampled(n):
    ens = MuEnsemble(1.1, n)
    basis = size_basis(ens)
    gen = np.random.default_rng(n)
    for b in gen.choice(basis.n_strings, 40, replace=False):
        ov = basis.overlaps(basis.string_matrix(b))
        expected = np.zeros(basis.n_strings)
        expected[b] = basis.lengths[b]
        assert np.allclose(ov, expected, atol=1e-14)


def test_site_lengths():
    mu = 2.0
    basis = SizeBasis(MuEnsemble(mu, 1))
    c_len = math.exp(-mu / 2) / (1 + math.exp(-mu))
    n_len = math.exp(-mu) / (1 + math.exp(-mu)) ** 2
    assert np.allclose(basis.lengths, [1.0, c_len, c_len, n_len], rtol=1e-14)
    assert basis.sizes.tolist() == [0, 1, 1, 2]


def test_fast_strings_match_explicit_products():
    ens = MuEnsemble(0.8, 4)
    basis = size_basis(ens)
    for b in range(basis.n_strings):
        ref = explicit_string(ens, basis.label(b)).matrix
        assert np.allclose(basis.string_matrix(b).matrix, ref, rtol=0, atol=1e-15)
    assert basis.index(("c", "1", "n", "cd")) == 0b01001110


def test_hamiltonian_hermitian_and_charge_conserving(h6):
    m = h6.matrix
    assert np.abs(m - m.conj().T).max() == 0.0
    assert np.abs(h6.commutator(total_charge(6)).matrix).max() < 1e-13
    assert np.abs(m).max() > 0
    h8 = build_syk_hamiltonian(5, 6, 1.0, 3)
    assert np.abs(h8.matrix - h8.matrix.conj().T).max() == 0.0


def test_coupling_variance():
    n, q, J = 6, 4, 1.3
    expected = J ** 2 * math.factorial(1) * math.factorial(2) / n ** 3
    draws = np.array([sample_syk_couplings(n, q, J, RngStream(m, ("var",)))[2, 7] for m in range(10_000)])
    assert np.mean(np.abs(draws) ** 2) == pytest.approx(expected, rel=0.05)


def test_hamiltonian_errors():
    with pytest.raises(ValueError):
        build_syk_hamiltonian(6, 3, 1.0, 0)
    with pytest.raises(ValueError):
        build_syk_hamiltonian(2, 6, 1.0, 0)
    with pytest.raises(ValueError):
        build_syk_hamiltonian(7, 4, 1.0, 0)
    with pytest.raises(ValueError):
        build_syk_hamiltonian(9, 4, 1.0, 0, allow_large=True)
    with pytest.raises(ValueError):
        SizeBasis(MuEnsemble(0.0, 7))
    with pytest.raises(ValueError):
        opsize.Spectrum.of(FockOperator(np.triu(np.ones((4, 4))), 2))


def test_evolution_trivial_cases(h6):
    c = annihilation(6, 1)
    assert np.allclose(heisenberg_evolve(c, h6, 0.0).matrix, c.matrix, atol=1e-13)
    hn = number(4, 0) * 0.7 + number(4, 2) @ number(4, 3) * 1.9
    n1 = number(4, 1)
    assert np.allclose(heisenberg_evolve(n1, hn, 3.0).matrix, n1.matrix, atol=1e-13)


@pytest.mark.parametrize("mu", [0.0, 2.0])
def test_norm_conserved(h6, mu):
    ens = MuEnsemble(mu, 6)
    c = annihilation(6, 1)
    ref = inner_product(c, c, ens).real
    spec = opsize.Spectrum.of(h6)
    for t in np.linspace(0, 10, 11):
        ct = heisenberg_evolve(c, spec, t)
        assert abs(inner_product(ct, ct, ens).real - ref) < 1e-10


def test_size_distribution_examples():
    ens = MuEnsemble(1.0, 4)
    p = size_distribution(annihilation(4, 1), ens).probabilities
    assert p[1] == pytest.approx(1.0, abs=1e-12) and p.sum() == pytest.approx(1.0, abs=1e-12)
    d = number(4, 2) - identity(4) * ens.nbar
    assert size_distribution(d, ens).probabilities[2] == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        size_distribution(identity(4) * 0.0, ens)


def test_small_time_size_growth_is_quadratic():
    h = build_syk_hamiltonian(4, 4, 1.0, RngStream(2, ("h4",)))
    ens = MuEnsemble(0.5, 4)
    c = annihilation(4, 1)
    loss = []
    for t in (0.01, 0.02):
        dist = size_distribution(heisenberg_evolve(c, h, t), ens)
        assert dist.total == pytest.approx(1.0, abs=1e-10)
        loss.append(1.0 - dist.probabilities[1])
    slope = math.log(loss[1] / loss[0]) / math.log(2)
    assert slope == pytest.approx(2.0, abs=0.01)


@pytest.mark.parametrize("mu", [0.0, 1.0, 4.0])
def test_probabilities_sum_to_one_and_parity(h6, mu):
    ens = MuEnsemble(mu, 6)
    for t in (0.5, 2.0, 7.0):
        dist = size_distribution(heisenberg_evolve(annihilation(6, 0), h6, t), ens)
        assert abs(dist.total - 1) < 1e-10
        assert np.all(dist.probabilities >= -1e-15)
        assert np.all(np.abs(dist.probabilities[::2]) < 1e-12)


def test_bound_factor_example():
    h = build_syk_hamiltonian(4, 4, 1.0, 5)
    rep = block_bound_report(h, 3, 1, [0.0, 2.0])
    assert rep["entries"][0]["bound_factor"] == 1.0
    assert rep["entries"][0]["ratio"] == pytest.approx(1.0)
    assert rep["entries"][1]["bound_factor"] == pytest.approx(1 / math.cosh(1.0), abs=1e-15)
    assert rep["entries"][1]["bound_factor"] == pytest.approx(0.648054, abs=1e-6)


def test_bound_holds_for_random_hamiltonians():
    for m in range(3):
        h = build_syk_hamiltonian(6, 4, 1.0, RngStream(m, ("bound",)))
        for s, sp in ((1, 3), (3, 1), (3, 5)):
            rep = block_bound_report(h, s, sp, [0.0, 1.0, 2.0, 4.0])
            assert rep["violations"] == 0, rep


def test_liouvillian_antisymmetry(h6):
    ens = MuEnsemble(1.5, 6)
    a = liouvillian_block(h6, 3, 1, ens)
    b = liouvillian_block(h6, 1, 3, ens)
    assert np.allclose(a, -b.conj().T, atol=1e-12)
    assert np.linalg.norm(a, 2) == pytest.approx(np.linalg.norm(b, 2), rel=1e-12)
    gen = np.random.default_rng(1)
    x = FockOperator(gen.normal(size=(64, 64)), 6)
    y = FockOperator(gen.normal(size=(64, 64)) * 1j, 6)

    def lv(op):
        return h6.commutator(op) * 1j

    assert inner_product(x, lv(y), ens) == pytest.approx(-np.conj(inner_product(y, lv(x), ens)), abs=1e-10)
    with pytest.raises(ValueError):
        liouvillian_block(h6, 13, 1, ens)


def test_sum_rule():
    h = build_syk_hamiltonian(5, 4, 1.0, RngStream(4, ("sum",)))
    ens0 = MuEnsemble(0.0, 5)
    rep = otoc_exact_and_sumrule(h, 2, 0.0, ens0)
    assert rep["sum_C"] == pytest.approx(1.0, abs=1e-12)
    assert rep["size"] == pytest.approx(1.0, abs=1e-12)
    assert rep["C"][2] == pytest.approx(1.0, abs=1e-12)
    for mu in (0.0, 2.0):
        for t in (0.5, 1.0, 2.0):
            assert otoc_exact_and_sumrule(h, 2, t, MuEnsemble(mu, 5))["slack"] >= -1e-10
    big = otoc_exact_and_sumrule(h, 2, 1.0, MuEnsemble(4.0, 5))["size"]
    assert big < otoc_exact_and_sumrule(h, 2, 1.0, ens0)["size"]


def test_reports_write(tmp_path):
    ens = MuEnsemble(0.0, 3)
    dists = [size_distribution(annihilation(3, 0), ens)] * 2
    write_size_table(tmp_path / "p.csv", [0.0, 1.0], dists)
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "t,s,P_s" and len(lines) == 1 + 2 * 7
    text = opsize.report_json({"a": 1}, tmp_path / "r.json")
    assert (tmp_path / "r.json").read_text().strip() == text
