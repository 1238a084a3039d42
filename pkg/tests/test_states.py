import json
import math

import numpy as np
import pytest

from spinorb import states
from spinorb.states import (
    BLOCK_LABELS,
    DensityMatrix,
    OamKet,
    PureState,
    SpinKet,
    angular_momentum_expectations,
    bell_state,
    block_density,
    density_from_pure,
    entanglement_entropy,
    fidelity,
    matrix_sqrt_psd,
    partial_trace,
    tensor,
    trace_distance,
)

RT2 = math.sqrt(0.5)


def random_density(rng, dim=4):
    b = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = b.conj().T @ b
    m = m / np.trace(m).real
    labels = BLOCK_LABELS if dim == 4 else [(0, i) for i in range(dim)]
    return DensityMatrix(m, labels)


class TestKets:
    def test_constructors_normalize(self):
        k = SpinKet([3.0, 4.0j])
        assert abs(np.linalg.norm(k.amplitudes) - 1.0) < 1e-12

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            SpinKet([0.0, 0.0])

    def test_circular_linear_relation(self):
        # |H> = (|s+> + |s->)/sqrt(2), |V> = (|s+> - |s->)/(sqrt(2) i)
        h = SpinKet.h()
        assert np.allclose(h.amplitudes, [RT2, RT2], atol=1e-12)
        v = SpinKet.v()
        assert np.allclose(v.amplitudes, [-1j * RT2, 1j * RT2], atol=1e-12)

    def test_hv_round_trip(self):
        k = SpinKet([0.3 + 0.1j, 0.7 - 0.2j])
        back = SpinKet.from_hv(*k.hv)
        assert abs(abs(k.overlap(back)) - 1.0) < 1e-12

    def test_oam_basis_and_bounds(self):
        k = OamKet.basis(-1, truncation=2)
        assert k.amplitude(-1) == 1.0
        assert k.amplitude(2) == 0.0
        with pytest.raises(ValueError):
            OamKet.basis(3, truncation=2)


class TestTensor:
    def test_h_times_l0(self):
        psi = tensor(SpinKet.h(), OamKet.basis(0))
        assert abs(psi.amplitude(+1, 0) - RT2) < 1e-12
        assert abs(psi.amplitude(-1, 0) - RT2) < 1e-12

    def test_basis_case(self):
        psi = tensor(SpinKet.sigma_plus(), OamKet.basis(1))
        assert abs(psi.amplitude(+1, +1) - 1.0) < 1e-12

    def test_v_times_l0(self):
        # 1/(sqrt(2) i) = -i/sqrt(2) at (s+, 0), +i/sqrt(2) at (s-, 0)
        psi = tensor(SpinKet.v(), OamKet.basis(0))
        assert abs(psi.amplitude(+1, 0) - (-1j * RT2)) < 1e-12
        assert abs(psi.amplitude(-1, 0) - (1j * RT2)) < 1e-12

    def test_factorizable_equals_product(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            s = SpinKet(rng.normal(size=2) + 1j * rng.normal(size=2))
            o = OamKet(rng.normal(size=3) + 1j * rng.normal(size=3), 1)
            psi = tensor(s, o)
            direct = np.kron(s.amplitudes, o.amplitudes)
            assert np.abs(psi.amplitudes - direct).max() < 1e-12


class TestDensityMatrix:
    def test_pure_projector_basis_state(self):
        rho = density_from_pure(tensor(SpinKet.sigma_plus(), OamKet.basis(1)))
        diag = np.diag(rho.entries).real
        assert abs(diag.sum() - 1.0) < 1e-12
        assert abs(rho.entries[rho.basis_labels.index((1, 1)), rho.basis_labels.index((1, 1))] - 1.0) < 1e-12

    def test_bell_block_pattern(self):
        # four entries of 1/2 at the (s+,-1)/(s-,+1) corners
        rho = block_density(bell_state("psi+"))
        expected = np.zeros((4, 4))
        i, j = BLOCK_LABELS.index((+1, -1)), BLOCK_LABELS.index((-1, +1))
        expected[i, i] = expected[i, j] = expected[j, i] = expected[j, j] = 0.5
        assert np.abs(rho.entries - expected).max() < 1e-12

    def test_trace_one_for_any_pure(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            psi = PureState(rng.normal(size=6) + 1j * rng.normal(size=6), 1)
            assert abs(np.trace(density_from_pure(psi).entries).real - 1.0) < 1e-10

    def test_validation_rejects_bad_input(self):
        with pytest.raises(ValueError):
            DensityMatrix([[1.0, 1.0], [0.0, 0.0]], [(0, 0), (0, 1)])  # not Hermitian
        with pytest.raises(ValueError):
            DensityMatrix(np.eye(2), [(0, 0), (0, 1)])  # trace 2
        m = np.diag([1.5, -0.5]).astype(complex)
        with pytest.raises(ValueError):
            DensityMatrix(m, [(0, 0), (0, 1)])  # negative eigenvalue

    def test_json_round_trip_is_bit_faithful(self):
        rng = np.random.default_rng(11)
        rho = random_density(rng)
        back = DensityMatrix.from_json(rho.to_json())
        assert np.array_equal(back.entries, rho.entries)
        assert back.basis_labels == rho.basis_labels

    def test_json_fields(self):
        payload = json.loads(block_density(bell_state("phi-")).to_json())
        assert payload["dim"] == 4
        assert payload["basis_labels"] == [list(p) for p in BLOCK_LABELS]
        assert len(payload["re"]) == 4 and len(payload["im"]) == 4


class TestMatrixSqrt:
    def test_identity(self):
        assert np.abs(matrix_sqrt_psd(np.eye(4)) - np.eye(4)).max() < 1e-12

    def test_diagonal(self):
        root = matrix_sqrt_psd(np.diag([4.0, 1.0, 0.0, 0.0]))
        assert np.abs(root - np.diag([2.0, 1.0, 0.0, 0.0])).max() < 1e-12

    def test_square_recovers_input(self):
        rng = np.random.default_rng(5)
        for _ in range(1000):
            dim = rng.integers(2, 9)
            b = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
            m = b.conj().T @ b
            m /= np.trace(m).real  # keep entries O(1)
            root = matrix_sqrt_psd(m)
            assert np.abs(root @ root - m).max() < 1e-8

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            matrix_sqrt_psd(np.array([[0.0, 1.0], [0.0, 0.0]]))


class TestFidelity:
    def test_self_fidelity(self):
        rng = np.random.default_rng(13)
        rho = random_density(rng)
        assert abs(fidelity(rho, rho) - 1.0) < 1e-9

    def test_orthogonal_pure_states(self):
        a = density_from_pure(tensor(SpinKet.sigma_plus(), OamKet.basis(1)))
        b = density_from_pure(tensor(SpinKet.sigma_minus(), OamKet.basis(-1)))
        assert fidelity(a, b) < 1e-9

    def test_symmetry(self):
        rng = np.random.default_rng(17)
        for _ in range(25):
            a, b = random_density(rng), random_density(rng)
            assert abs(fidelity(a, b) - fidelity(b, a)) < 1e-8

    def test_pure_state_reduction(self):
        rng = np.random.default_rng(19)
        for _ in range(25):
            amps = rng.normal(size=4) + 1j * rng.normal(size=4)
            amps /= np.linalg.norm(amps)
            pure = DensityMatrix(np.outer(amps, amps.conj()), BLOCK_LABELS)
            sigma = random_density(rng)
            direct = math.sqrt(float(np.real(amps.conj() @ sigma.entries @ amps)))
            assert abs(fidelity(pure, sigma) - direct) < 1e-8

    def test_dimension_mismatch(self):
        a = density_from_pure(bell_state("psi+"))
        b = block_density(bell_state("psi+"))
        with pytest.raises(ValueError):
            fidelity(a, b)

    def test_trace_distance_basics(self):
        a = block_density(bell_state("psi+"))
        b = block_density(bell_state("psi-"))
        assert trace_distance(a, a) < 1e-12
        assert abs(trace_distance(a, b) - 1.0) < 1e-9  # orthogonal pure states


class TestPartialTrace:
    def test_bell_marginals_are_maximally_mixed(self):
        for kind in ("psi+", "psi-", "phi+", "phi-"):
            rho = block_density(bell_state(kind))
            for traced in ("oam", "spin"):
                marginal = partial_trace(rho, traced)
                assert np.abs(marginal.entries - np.eye(2) / 2).max() < 1e-9

    def test_product_state_marginal(self):
        rho = density_from_pure(tensor(SpinKet.sigma_plus(), OamKet.basis(1)))
        spin = partial_trace(rho, "oam")
        assert np.abs(spin.entries - np.diag([1.0, 0.0])).max() < 1e-12

    def test_trace_preserved(self):
        rng = np.random.default_rng(23)
        rho = random_density(rng, dim=6)
        labels = tuple((s, l) for s in (+1, -1) for l in (-1, 0, 1))
        rho = DensityMatrix(rho.entries, labels)
        for traced in ("oam", "spin"):
            out = partial_trace(rho, traced)
            assert abs(np.trace(out.entries).real - 1.0) < 1e-10


class TestEntropyAndAngularMomentum:
    def test_bell_state_is_one_bit(self):
        assert abs(entanglement_entropy(bell_state("psi+")) - 1.0) < 1e-9

    def test_product_state_is_zero(self):
        psi = tensor(SpinKet.sigma_plus(), OamKet.basis(1))
        assert entanglement_entropy(psi) < 1e-12

    def test_schmidt_entropy_closed_form(self):
        a = np.zeros(6, dtype=complex)
        psi_template = bell_state("psi+")
        a[psi_template.index(+1, -1)] = math.sqrt(0.9)
        a[psi_template.index(-1, +1)] = math.sqrt(0.1)
        psi = PureState(a, 1)
        expected = -0.9 * math.log2(0.9) - 0.1 * math.log2(0.1)
        assert abs(entanglement_entropy(psi) - expected) < 1e-12

    def test_support_outside_block_rejected(self):
        psi = tensor(SpinKet.h(), OamKet.basis(0))
        with pytest.raises(ValueError):
            entanglement_entropy(psi)

    def test_expectations(self):
        sig, ell = angular_momentum_expectations(tensor(SpinKet.h(), OamKet.basis(0)))
        assert abs(sig) < 1e-12 and abs(ell) < 1e-12
        sig, ell = angular_momentum_expectations(tensor(SpinKet.sigma_plus(), OamKet.basis(1)))
        assert abs(sig - 1.0) < 1e-12 and abs(ell - 1.0) < 1e-12


class TestBellStates:
    def test_definitions(self):
        psi = bell_state("psi+")
        assert abs(psi.amplitude(+1, -1) - RT2) < 1e-12
        assert abs(psi.amplitude(-1, +1) - RT2) < 1e-12
        phi = bell_state("phi-")
        assert abs(phi.amplitude(+1, +1) - RT2) < 1e-12
        assert abs(phi.amplitude(-1, -1) + RT2) < 1e-12

    def test_pairwise_orthogonal(self):
        kinds = ("psi+", "psi-", "phi+", "phi-")
        for i, a in enumerate(kinds):
            for b in kinds[i + 1:]:
                assert abs(bell_state(a).overlap(bell_state(b))) < 1e-12

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            bell_state("omega+")
