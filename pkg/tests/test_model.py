import itertools
import math

import numpy as np
import pytest

from pvbs.errors import ValidationError
from pvbs.lattice import LatticeRegion, make_box
from pvbs.model import (
    ModelParams,
    SectorBasis,
    SparseOperator,
    assemble_full,
    assemble_multispecies,
    assemble_sector,
    bond_matrix,
    multispecies_bond_matrix,
    one_particle_matrix,
    popcount,
)

from oracles import dense_hamiltonian, dense_one_particle, l_shape, multispecies_dense, two_site_term


def test_params_validation():
    with pytest.raises(ValidationError):
        ModelParams((0.0, 1.0))
    with pytest.raises(ValidationError):
        ModelParams((1.0, -2.0))
    with pytest.raises(ValidationError):
        ModelParams((1.0,), species=0)
    with pytest.raises(ValidationError):
        ModelParams((1.0,), species=2, multi_lam=((1.0,),))
    with pytest.raises(ValidationError):
        ModelParams((1.0,), delta=-1.0).require_ground_state_regime()
    p = ModelParams((0.5, 2.0), delta=0.3, species=2)
    assert ModelParams.from_dict(p.to_dict()) == p


def test_bond_matrix_lambda_one():
    h = bond_matrix(0, ModelParams((1.0,)))
    assert np.allclose(h[1:3, 1:3], [[0.5, -0.5], [-0.5, 0.5]], atol=0, rtol=0)
    assert h[0, 0] == 0.0 and h[3, 3] == 1.0


@pytest.mark.parametrize("lam", [0.1, 0.5, 1.0, 2.0, 7.3])
def test_bond_matrix_matches_projector(lam):
    h = bond_matrix(0, ModelParams((lam,)))
    assert np.allclose(h, two_site_term(lam), atol=1e-15)
    assert np.allclose(np.linalg.eigvalsh(h), [0, 0, 1, 1], atol=1e-14)


@pytest.mark.parametrize("delta", [-0.5, 0.0, 1.0, 5.0])
def test_bond_spectrum_with_delta(delta):
    h = bond_matrix(1, ModelParams((0.4, 1.9), delta=delta))
    assert np.allclose(np.sort(np.linalg.eigvalsh(h)), np.sort([0, 0, 1, 1 + delta]), atol=1e-14)


def test_bond_matrix_axis_range():
    with pytest.raises(ValidationError):
        bond_matrix(2, ModelParams((1.0, 1.0)))


def test_sector_basis():
    b = SectorBasis(5, 2)
    assert b.dim == math.comb(5, 2)
    assert np.all(popcount(b.configs) == 2)
    assert np.all(np.diff(b.configs) > 0)
    assert np.array_equal(b.rank(b.configs), np.arange(b.dim))
    full = SectorBasis(4)
    assert full.dim == 16 and np.array_equal(full.configs, np.arange(16))
    with pytest.raises(KeyError):
        b.rank(0b111)
    with pytest.raises(ValidationError):
        SectorBasis(3, 4)


def test_large_one_particle_basis():
    b = SectorBasis(100, 1)
    assert b.dim == 100
    assert b.rank([1 << 70, 1])[0] == 70


def test_single_site_full_is_zero():
    op = assemble_full(make_box((0,)), ModelParams((0.5,)))
    assert op.dim == 2 and op.nnz == 0


@pytest.mark.parametrize("lam", [0.3, 1.0, 2.5])
def test_two_site_chain_spectrum(lam):
    op = assemble_full(make_box((1,)), ModelParams((lam,)))
    assert np.allclose(np.linalg.eigvalsh(op.toarray()), [0, 0, 1, 1], atol=1e-14)


@pytest.mark.parametrize("sites, lam, delta", [
    (list(itertools.product(range(2), range(2))), (1.0, 1.0), 0.0),
    (list(itertools.product(range(3), range(2))), (0.6, 1.7), 0.0),
    (l_shape(), (0.5, 2.0), 0.7),
    ([(x,) for x in range(6)], (0.45,), -0.5),
    (list(itertools.product(range(2), range(2), range(2))), (0.5, 1.3, 0.8), 0.0),
])
def test_full_assembly_against_oracle(sites, lam, delta):
    region = LatticeRegion(sites)
    op = assemble_full(region, ModelParams(lam, delta=delta))
    assert op.is_symmetric()
    assert np.allclose(op.toarray(), dense_hamiltonian(region.sites, lam, delta), atol=1e-15)


def test_b2_spectrum_oracle():
    H = assemble_full(make_box((1, 1)), ModelParams((1.0, 1.0))).toarray()
    ev = np.linalg.eigvalsh(H)
    assert np.allclose(ev[:2], 0, atol=1e-14)
    assert abs(ev[2] - (2 - math.sqrt(2))) < 1e-12


def test_full_cap():
    with pytest.raises(ValidationError):
        assemble_full(make_box((4, 4)), ModelParams((1.0, 1.0)))


def test_disconnected_warns():
    with pytest.warns(RuntimeWarning):
        assemble_full(LatticeRegion([(0,), (2,)]), ModelParams((1.0,)))


def test_sector_examples():
    chain = make_box((2,))
    p = ModelParams((0.5,))
    H1 = assemble_sector(chain, p, 1).toarray()
    expected = np.array([[0.2, -0.4, 0.0], [-0.4, 1.0, -0.4], [0.0, -0.4, 0.8]])
    assert np.allclose(H1, expected, atol=1e-15)
    assert np.allclose(one_particle_matrix(chain, p).toarray(), expected, atol=1e-15)
    H0 = assemble_sector(chain, p, 0)
    assert H0.dim == 1 and H0.nnz == 0
    with pytest.raises(ValidationError):
        assemble_sector(chain, p, 4)


@pytest.mark.parametrize("delta", [0.0, 0.6])
def test_full_filling_is_diagonal(delta):
    region = make_box((2, 1))
    op = assemble_sector(region, ModelParams((0.7, 1.4), delta=delta), region.n_sites)
    assert op.dim == 1
    assert op.toarray()[0, 0] >= (1 + delta) - 1e-15


@pytest.mark.parametrize("dims", [(2, 1), (3, 2), (9,), (1, 1, 1)])
def test_sector_blocks_match_full(dims):
    region = make_box(dims)
    p = ModelParams(tuple(0.4 + 0.5 * k for k in range(len(dims))), delta=0.25)
    full = assemble_full(region, p).toarray()
    for N in range(region.n_sites + 1):
        basis = SectorBasis(region.n_sites, N)
        block = full[np.ix_(basis.configs, basis.configs)]
        assert np.allclose(assemble_sector(region, p, N).toarray(), block, atol=1e-14)


def test_particle_number_conservation():
    region = make_box((2, 2))
    op = assemble_full(region, ModelParams((0.8, 1.2)))
    rng = np.random.default_rng(3)
    counts = popcount(np.arange(op.dim))
    for N in range(region.n_sites + 1):
        v = np.where(counts == N, rng.standard_normal(op.dim), 0.0)
        w = op.matvec(v)
        assert np.all(w[counts != N] == 0.0)


def test_one_particle_against_oracle():
    region = make_box((4, 3, 1))
    lam = (0.5, 1.5, 0.9)
    H = one_particle_matrix(region, ModelParams(lam)).toarray()
    assert np.allclose(H, dense_one_particle(region.sites, lam), atol=1e-15)


def test_one_particle_single_site():
    assert one_particle_matrix(make_box((0, 0)), ModelParams((1.0, 1.0))).toarray().tolist() == [[0.0]]


def test_triplet_roundtrip(tmp_path):
    op = assemble_full(make_box((2, 1)), ModelParams((0.3, 1.7)))
    path = tmp_path / "h.txt"
    op.write_triplets(path)
    back = SparseOperator.read_triplets(path)
    assert back.dim == op.dim
    assert np.array_equal(back.toarray(), op.toarray())


def test_multispecies_bond_psd():
    p = ModelParams((0.6, 1.4), species=2, multi_lam=((0.6, 1.4), (2.0, 0.3)))
    for axis in range(2):
        assert np.linalg.eigvalsh(multispecies_bond_matrix(axis, p)).min() > -1e-14


def test_multispecies_single_site():
    op = assemble_multispecies(make_box((0,)), ModelParams((0.5,), species=2))
    assert op.dim == 3 and op.nnz == 0


def test_multispecies_reduces_to_single_species():
    region = make_box((1, 1))
    p = ModelParams((0.7, 1.6), delta=0.4)
    assert np.allclose(assemble_multispecies(region, p).toarray(), assemble_full(region, p).toarray(),
                       atol=1e-15)


@pytest.mark.parametrize("sites", [[(x,) for x in range(3)], [(0, 0), (0, 1), (1, 0), (1, 1)]])
def test_multispecies_against_oracle(sites):
    region = LatticeRegion(sites)
    d = region.d
    ml = ((0.5, 1.7)[:d], (1.3, 0.4)[:d])
    p = ModelParams(ml[0], species=2, multi_lam=ml, delta=0.2)
    assert np.allclose(assemble_multispecies(region, p).toarray(),
                       multispecies_dense(region.sites, ml, 0.2), atol=1e-14)


def test_multispecies_cap():
    with pytest.raises(ValidationError):
        assemble_multispecies(make_box((3, 3)), ModelParams((1.0, 1.0), species=2))
