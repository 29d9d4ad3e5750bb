import itertools
import math

import numpy as np
import pytest

from pvbs.errors import ValidationError
from pvbs.groundstate import (
    bond_residuals,
    geometric_sum,
    kernel_basis,
    log_normalization_C,
    multispecies_ground_state,
    normalization_C,
    normalization_table,
    one_particle_ground_state,
    vacuum_vector,
)
from pvbs.lattice import LatticeRegion, make_box, make_centered_box, make_diamond
from pvbs.model import ModelParams, SectorBasis, assemble_full, assemble_multispecies, assemble_sector

from oracles import dense_hamiltonian, ground_pair, l_shape, subspace_angle


def test_C_examples():
    assert normalization_C(make_box((0, 0)), ModelParams((0.3, 4.0))) == 1.0
    assert math.isclose(normalization_C(make_box((1, 1)), ModelParams((0.5, 1 / 3))), 25 / 18, rel_tol=1e-14)


def test_C_monotone_to_limit():
    p = ModelParams((0.5, 0.5))
    vals = [normalization_C(make_box((n, n)), p) for n in range(1, 30)]
    assert all(b > a for a, b in zip(vals, vals[1:12]))
    # past n ~ 12 increments are below one ulp of the log-space sum
    assert all(b >= a * (1 - 2e-16) for a, b in zip(vals, vals[1:]))
    assert abs(vals[-1] - 16 / 9) < 1e-15


@pytest.mark.parametrize("lo, hi, lam", [((0, 0), (4, 6), (0.5, 1.7)), ((-3, 2), (3, 5), (2.0, 0.3)),
                                          ((-2, -2, 0), (1, 2, 3), (1.0, 0.8, 1.25))])
def test_C_box_factorizes(lo, hi, lam):
    region = LatticeRegion(itertools.product(*(range(a, b + 1) for a, b in zip(lo, hi))))
    p = ModelParams(lam)
    direct = sum(math.prod(l ** (2 * x) for l, x in zip(lam, s)) for s in region.sites)
    table = normalization_table(lo, hi, p)
    assert math.isclose(normalization_C(region, p), direct, rel_tol=1e-13)
    assert math.isclose(table.C_value, direct, rel_tol=1e-13)


def test_C_overflow_guard():
    region = make_box((600,))
    p = ModelParams((10.0,))
    with pytest.raises(OverflowError):
        normalization_C(region, p)
    assert math.isclose(log_normalization_C(region, p), 1200 * math.log(10) - math.log(0.99), rel_tol=1e-12)


def test_geometric_sum():
    assert geometric_sum(0.5, 2) == 1 + 0.25 + 0.0625
    assert geometric_sum(1.0, 4) == 5.0
    assert geometric_sum(3.0, -1) == 0.0


def test_vacuum():
    region = make_box((2, 2))
    psi0 = vacuum_vector(region)
    assert psi0.amplitudes[0] == 1.0 and psi0.norm == 1.0
    H = assemble_full(region, ModelParams((2.0, 0.7)))
    assert np.abs(H.matvec(psi0.amplitudes)).max() <= 1e-14
    with pytest.raises(ValidationError):
        vacuum_vector(region, SectorBasis(region.n_sites, 1))


def test_one_particle_examples():
    single = one_particle_ground_state(make_box((0,)), ModelParams((0.5,)))
    assert single.amplitudes.tolist() == [1.0]
    chain = one_particle_ground_state(make_box((2,)), ModelParams((0.5,)))
    assert np.allclose(chain.amplitudes, np.array([1, 0.5, 0.25]) / math.sqrt(21 / 16), atol=1e-15)


def test_one_particle_rejects_disconnected():
    with pytest.raises(ValidationError):
        one_particle_ground_state(LatticeRegion([(0,), (2,)]), ModelParams((1.0,)))


def test_diamond_bond_residual():
    region = make_diamond(6).region
    psi = one_particle_ground_state(region, ModelParams((0.5, 0.5)))
    assert bond_residuals(region, ModelParams((0.5, 0.5)), psi).max() <= 1e-12


def test_ratio_recursion():
    region = make_box((5, 4))
    p = ModelParams((0.3, 2.2))
    a = one_particle_ground_state(region, p).amplitudes
    lam = np.asarray(p.lam)[region.edge_axis]
    assert np.allclose(a[region.edge_dst], lam * a[region.edge_src], rtol=1e-13, atol=0)


def test_full_space_residuals_and_orthogonality():
    region = make_box((2, 1))
    p = ModelParams((0.6, 1.7))
    psi0, psi1 = kernel_basis(region, p)
    assert psi0.dot(psi1) == 0.0
    assert math.isclose(psi1.norm, 1.0, rel_tol=1e-15)
    for psi in (psi0, psi1):
        assert bond_residuals(region, p, psi).max() <= 1e-12
    ref0, ref1 = ground_pair(region.sites, p.lam)
    assert np.allclose(psi1.amplitudes, ref1, atol=1e-15)


@pytest.mark.parametrize("sites, lam", [
    (list(itertools.product(range(3), range(2))), (0.6, 1.7)),
    (l_shape(), (0.6, 1.7)),
])
def test_kernel_span(sites, lam):
    region = LatticeRegion(sites)
    H = dense_hamiltonian(region.sites, lam)
    ev, vec = np.linalg.eigh(H)
    kernel = vec[:, ev < 1e-10 * (1 + np.abs(H).sum(axis=0).max())]
    assert kernel.shape[1] == 2
    psi0, psi1 = kernel_basis(region, ModelParams(lam))
    assert subspace_angle(kernel, np.column_stack([psi0.amplitudes, psi1.amplitudes])) <= 1e-8


def test_kernel_basis_requires_full():
    with pytest.raises(ValidationError):
        kernel_basis(make_box((2,)), ModelParams((0.5,)), SectorBasis(3, 1))


@pytest.mark.parametrize("dims", [(2,), (1, 1), (2, 1), (3, 2)])
def test_no_two_particle_kernel(dims):
    region = make_box(dims)
    H2 = assemble_sector(region, ModelParams(tuple([0.7, 1.3][: len(dims)])), 2).toarray()
    assert np.linalg.eigvalsh(H2).min() > 1e-6


def test_translation_covariance():
    region = make_box((3, 2))
    p = ModelParams((0.4, 1.6))
    shift = (5, -2)
    a = one_particle_ground_state(region, p).amplitudes
    b = one_particle_ground_state(region.translated(shift), p).amplitudes
    assert np.allclose(a, b, atol=1e-15)


def test_extreme_weights_stay_finite():
    region = make_box((300, 300))
    p = ModelParams((0.05, 20.0))
    a = one_particle_ground_state(region, p).amplitudes
    assert np.isfinite(a).all() and math.isclose(np.linalg.norm(a), 1.0, rel_tol=1e-12)


def test_large_one_particle_state():
    region = make_centered_box((50, 50))
    p = ModelParams((0.9, 1.1))
    psi = one_particle_ground_state(region, p)
    assert bond_residuals(region, p, psi).max() <= 1e-12


def test_multispecies_reduces():
    chain = make_box((2,))
    p = ModelParams((0.4,), species=2, multi_lam=((0.4,), (1.9,)))
    psi = multispecies_ground_state(chain, p, [1])
    expected = np.zeros(27)
    for site in range(3):
        expected[3**site] = 0.4**site
    assert np.allclose(psi.amplitudes, expected / np.linalg.norm(expected), atol=1e-15)
    assert multispecies_ground_state(chain, p, []).amplitudes[0] == 1.0


def test_multispecies_kernel_box():
    region = make_box((1, 1))
    ml = ((0.5, 1.4), (1.8, 0.6))
    p = ModelParams(ml[0], species=2, multi_lam=ml)
    H = assemble_multispecies(region, p)
    psi = multispecies_ground_state(region, p, [1, 2])
    assert np.linalg.norm(H.matvec(psi.amplitudes)) <= 1e-12


def test_multispecies_errors():
    p = ModelParams((0.5,), species=2)
    with pytest.raises(ValidationError):
        multispecies_ground_state(make_box((0,)), p, [1, 2])
    with pytest.raises(ValidationError):
        multispecies_ground_state(make_box((2,)), p, [3])


def test_state_export(tmp_path):
    region = make_box((1, 1))
    psi1 = kernel_basis(region, ModelParams((0.5, 0.5)))[1]
    path = tmp_path / "psi.txt"
    psi1.write_pairs(path, cutoff=1e-300)
    lines = path.read_text().split("\n")[:-1]
    assert [int(l.split()[0]) for l in lines] == [1, 2, 4, 8]
