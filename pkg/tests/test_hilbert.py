import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from collapsim.errors import (
    DegenerateSigmaError,
    GridError,
    InvalidDensityMatrixError,
    PacketOutsideGridError,
    SectorOutOfRangeError,
    UnnormalizedStateError,
)
from collapsim.hilbert import (
    DensityMatrix,
    FockRegister,
    GridSpec,
    JointState,
    WaveField,
    born_pdf,
    embed,
    gaussian_packet,
    norm,
    reduced_phonon_dm,
    sector_weight,
    sector_weights,
    von_neumann_entropy,
)

from conftest import branch_state, random_joint


def test_grid_derived_quantities():
    g = GridSpec(16, -4.0, 4.0)
    assert g.dx == 0.5
    assert g.x[0] == -4.0 and g.x[-1] == 3.5
    assert g.k_max == pytest.approx(np.pi / 0.5)
    with pytest.raises(ValueError):
        g.x[0] = 1.0


@pytest.mark.parametrize("n", [4, 12, 1000, 0])
def test_grid_rejects_bad_sizes(n):
    with pytest.raises(GridError):
        GridSpec(n, -1.0, 1.0)


def test_grid_rejects_inverted_range():
    with pytest.raises(GridError):
        GridSpec(16, 1.0, -1.0)


def test_fock_register():
    f = FockRegister(2)
    assert f.dim == 3
    with pytest.raises(SectorOutOfRangeError):
        f.check(3)
    with pytest.raises(SectorOutOfRangeError):
        FockRegister(0)


def test_states_are_read_only(grid):
    psi = gaussian_packet(grid, 0, 2, 1)
    with pytest.raises(ValueError):
        psi.amp[0] = 1.0


def test_nonfinite_amplitudes_rejected(small_grid):
    amp = np.zeros(small_grid.n_points, complex)
    amp[3] = np.nan
    with pytest.raises(ValueError):
        WaveField(small_grid, amp)


# gaussian_packet

@given(
    x0=st.floats(-20, 20),
    sigma=st.floats(0.3, 4.0),
    k0=st.floats(-10, 10),
)
@settings(max_examples=40, deadline=None)
def test_packet_normalized(x0, sigma, k0):
    assert abs(norm(gaussian_packet(GridSpec(), x0, sigma, k0)) - 1) < 1e-9


def test_packet_symmetric_without_momentum(grid):
    # x0 on a grid point so the mirror image is sampled too
    x0 = grid.x[540]
    a = np.abs(gaussian_packet(grid, x0, 1.5, 0.0).amp)
    i = 540
    assert np.allclose(a[i - 100:i], a[i + 100:i:-1], atol=1e-9)


def test_packet_mean_momentum_by_fourier_expectation(grid):
    psi = gaussian_packet(grid, -10.0, 1.0, 5.0)
    phi = np.fft.fft(psi.amp)
    p = np.abs(phi) ** 2
    k_mean = np.sum(grid.k * p) / np.sum(p)
    assert abs(k_mean - 5.0) < 1e-3


def test_packet_errors(grid):
    with pytest.raises(DegenerateSigmaError):
        gaussian_packet(grid, 0, 0.0, 0)
    with pytest.raises(PacketOutsideGridError):
        gaussian_packet(grid, 37.0, 1.0, 0)


# embed / norm / weights

def test_embed(grid, fock):
    psi = gaussian_packet(grid, 0, 2, 0)
    s = embed(psi, 0, fock)
    assert abs(norm(s) - 1) < 1e-12
    assert sector_weight(s, 0) == pytest.approx(1, abs=1e-12)
    assert sector_weight(s, 1) == 0
    with pytest.raises(SectorOutOfRangeError):
        embed(psi, 3, fock)
    with pytest.raises(SectorOutOfRangeError):
        sector_weight(s, -1)


def test_norm_basics(grid):
    assert norm(WaveField(grid, np.zeros(grid.n_points))) == 0
    psi = gaussian_packet(grid, 0, 2, 0)
    assert norm(WaveField(grid, 2 * psi.amp)) == pytest.approx(2 * norm(psi), abs=1e-12)


def test_branch_weights(grid, fock):
    s, _, _ = branch_state(grid, fock, w1=0.36)
    assert abs(sector_weight(s, 1) - 0.36) < 1e-9
    assert abs(sector_weights(s).sum() - 1) < 1e-9


# born_pdf

def test_born_single_point(small_grid):
    amp = np.zeros(small_grid.n_points, complex)
    amp[7] = 1 / np.sqrt(small_grid.dx)
    pdf = born_pdf(WaveField(small_grid, amp))
    assert pdf[7] == pytest.approx(1.0)
    assert np.count_nonzero(pdf) == 1


def test_born_two_point(small_grid):
    amp = np.zeros(small_grid.n_points, complex)
    amp[[3, 40]] = [1, 1j]
    amp /= np.sqrt(2 * small_grid.dx)
    pdf = born_pdf(WaveField(small_grid, amp))
    assert pdf[[3, 40]] == pytest.approx([0.5, 0.5])


def test_born_matches_normal_density(grid):
    x0, sigma = 1.3, 1.7
    pdf = born_pdf(gaussian_packet(grid, x0, sigma, 2.0))
    oracle = np.exp(-((grid.x - x0) ** 2) / (2 * sigma**2)) / (sigma * np.sqrt(2 * np.pi)) * grid.dx
    assert np.max(np.abs(pdf - oracle)) < 1e-6


def test_born_rejects_unnormalized(grid):
    psi = gaussian_packet(grid, 0, 2, 0)
    with pytest.raises(UnnormalizedStateError):
        born_pdf(WaveField(grid, psi.amp * 1.01))


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_born_pdf_sums_to_one(seed):
    g = GridSpec(64, -8, 8)
    rng = np.random.default_rng(seed)
    amp = rng.normal(size=64) + 1j * rng.normal(size=64)
    amp /= np.sqrt(np.sum(np.abs(amp) ** 2) * g.dx)
    assert abs(born_pdf(WaveField(g, amp)).sum() - 1) < 1e-9


# reduced density matrix and entropy

def test_rdm_product_state(grid, fock):
    rho = reduced_phonon_dm(embed(gaussian_packet(grid, 0, 2, 0), 0, fock))
    assert np.allclose(rho.elements, np.diag([1, 0, 0]), atol=1e-12)


def test_rdm_orthogonal_branches(grid, fock):
    s, _, _ = branch_state(grid, fock, w1=0.5)
    rho = reduced_phonon_dm(s).elements
    assert np.allclose(np.diag(rho)[:2], [0.5, 0.5], atol=1e-9)
    assert abs(rho[0, 1]) < 1e-9


def test_rdm_same_branch_is_pure(grid):
    psi = gaussian_packet(grid, 0, 2, 0)
    f = FockRegister(1)
    amp = np.stack([psi.amp, psi.amp], axis=1) / np.sqrt(2)
    rho = reduced_phonon_dm(JointState(grid, f, amp))
    assert rho.elements[0, 1] == pytest.approx(0.5, abs=1e-12)
    # 2x2 oracle: [[a, b], [b, a]] has eigenvalues a +- b
    a, b = 0.5, 0.5
    assert np.allclose(np.sort(rho.eigenvalues()), [a - b, a + b], atol=1e-12)


def test_rdm_rejects_unnormalized(grid, fock):
    psi = gaussian_packet(grid, 0, 2, 0)
    s = JointState(grid, fock, embed(psi, 0, fock).amp * 2)
    with pytest.raises(UnnormalizedStateError):
        reduced_phonon_dm(s)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_rdm_is_a_density_matrix(seed):
    g, f = GridSpec(32, -4, 4), FockRegister(3)
    rho = reduced_phonon_dm(random_joint(np.random.default_rng(seed), g, f)).elements
    assert np.max(np.abs(rho - rho.conj().T)) <= 1e-10
    assert abs(np.trace(rho) - 1) <= 1e-9
    assert np.linalg.eigvalsh(rho).min() >= -1e-10


def test_entropy_values():
    assert von_neumann_entropy(DensityMatrix(np.diag([0.5, 0.5]))) == pytest.approx(1.0, abs=1e-12)
    oracle = -(0.25 * np.log2(0.25) + 0.75 * np.log2(0.75))
    assert von_neumann_entropy(DensityMatrix(np.diag([0.25, 0.75]))) == pytest.approx(oracle, abs=1e-12)
    assert oracle == pytest.approx(0.811278, abs=1e-6)


def test_entropy_of_pure_state_is_zero():
    v = np.array([0.6, 0.8j, 0])
    assert abs(von_neumann_entropy(DensityMatrix(np.outer(v, v.conj())))) < 1e-9


def test_entropy_scan_over_qubit_mixtures():
    ps = np.round(np.arange(0, 1.0001, 0.05), 10)
    s = np.array([von_neumann_entropy(DensityMatrix(np.diag([p, 1 - p]))) for p in ps])
    assert np.argmax(s) == np.where(ps == 0.5)[0][0]
    assert s[0] == 0 and s[-1] == 0
    assert np.all(s >= -1e-9) and np.all(s <= 1 + 1e-9)


@pytest.mark.parametrize(
    "bad",
    [
        np.array([[0.5, 0.1], [0.2, 0.5]]),
        np.diag([0.6, 0.6]),
        np.diag([1.2, -0.2]),
        np.ones((2, 3)) / 2,
    ],
)
def test_invalid_density_matrices(bad):
    with pytest.raises(InvalidDensityMatrixError):
        DensityMatrix(bad)


def test_schmidt_symmetry_against_full_outer_product():
    rng = np.random.default_rng(5)
    g, f = GridSpec(16, -2, 2), FockRegister(1)
    s = random_joint(rng, g, f)
    vec = s.amp.ravel() * np.sqrt(g.dx)
    full = np.outer(vec, vec.conj()).reshape(16, 2, 16, 2)
    rho_e = np.einsum("injn->ij", full)
    lam_e = np.sort(np.linalg.eigvalsh(rho_e))[-2:]
    lam_p = np.sort(reduced_phonon_dm(s).eigenvalues())
    assert np.allclose(lam_e, lam_p, atol=1e-8)
