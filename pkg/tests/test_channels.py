import numpy as np
import pytest

from hetres import channels as ch
from hetres import theories as th
from hetres.qcore import (
    KET0,
    KET_PLUS,
    PAULI_X,
    TensorStructure,
    bell_phi_plus_vec,
    density,
    maximally_mixed,
    partial_trace_mat,
    pure_state,
    random_density_mat,
    random_pure_vec,
    single_party,
    trace_norm,
)
from hetres.scenarios import coherence_to_entanglement_channel, rotated_bell_preparation

S1 = single_party(2, "1")
S12 = TensorStructure([("1", 2), ("2", 2)])


class TestApplyCompose:
    def test_identity(self):
        rng = np.random.default_rng(0)
        rho = density(random_density_mat(rng, 4), S12)
        out = ch.apply(ch.identity_channel(S12), rho)
        assert np.max(np.abs(out.mat - rho.mat)) < 1e-14

    def test_pauli_x_flips(self):
        out = ch.apply(ch.unitary_channel(PAULI_X, S1), pure_state(KET0, S1))
        assert np.allclose(out.mat, np.diag([0.0, 1.0]))

    def test_conversion_channel_forward(self):
        lam = coherence_to_entanglement_channel()
        ket00 = np.zeros(4)
        ket00[0] = 1.0
        inp = np.kron(np.outer(KET_PLUS, KET_PLUS.conj()), np.outer(ket00, ket00))
        v = bell_phi_plus_vec(2)
        target = np.kron(np.diag([1.0, 0.0]), np.outer(v, v.conj()))
        assert trace_norm(lam.apply_mat(inp) - target) < 1e-12

    def test_compose_with_identity(self):
        rng = np.random.default_rng(1)
        lam = ch.random_channel(rng, 2, 2, 2)
        composed = ch.compose(ch.identity_channel(single_party(2, "0")), lam)
        rho = random_density_mat(rng, 2)
        assert np.max(np.abs(composed.apply_mat(rho) - lam.apply_mat(rho))) < 1e-12

    def test_rotated_preparation_is_constant(self):
        lam_p = rotated_bell_preparation()
        rng = np.random.default_rng(2)
        target = np.zeros((4, 4))
        target[0, 0] = 1.0
        for _ in range(5):
            rho = random_density_mat(rng, 4)
            assert trace_norm(lam_p.apply_mat(rho) - target) < 1e-10

    def test_double_dephasing_idempotent(self):
        deph = ch.KrausChannel(
            (np.diag([1.0, 0.0]).astype(complex), np.diag([0.0, 1.0]).astype(complex)),
            S1,
            S1,
        )
        twice = ch.compose(deph, deph)
        rng = np.random.default_rng(3)
        rho = random_density_mat(rng, 2)
        assert np.max(np.abs(twice.apply_mat(rho) - deph.apply_mat(rho))) < 1e-14

    def test_dimension_mismatch(self):
        lam = ch.identity_channel(S1)
        with pytest.raises(ValueError):
            lam.apply_mat(np.eye(4) / 4)


class TestMarginalChannel:
    def test_recovers_local_factor(self):
        rng = np.random.default_rng(4)
        ca = ch.random_channel(rng, 2, 2, 2)
        cb = ch.random_channel(rng, 3, 3, 2)
        prod = ch.product_channel([ca, cb], ["1", "2"])
        frozen = {"2": density(random_density_mat(rng, 3), single_party(3, "2"))}
        marg = ch.marginal_channel(prod, "1", frozen)
        for i in range(2):
            for j in range(2):
                unit = np.zeros((2, 2), dtype=complex)
                unit[i, j] = 1.0
                assert np.max(np.abs(marg.apply_mat(unit) - ca.apply_mat(unit))) < 1e-12

    def test_rotated_preparation_marginal_not_unital(self):
        lam_p = rotated_bell_preparation()
        marg = ch.marginal_channel(lam_p, "1", {"2": maximally_mixed(single_party(2, "2"))})
        image = marg.apply_mat(np.eye(2, dtype=complex) / 2)
        assert abs(trace_norm(image - np.eye(2) / 2) - 1.0) < 1e-10
        assert not ch.is_unital(marg)

    def test_swap_then_prepare_reduces_to_preparation(self):
        # swap the parties, then overwrite party 2 with a fixed state: the
        # marginal at party 1 prepares whatever was frozen there
        rng = np.random.default_rng(5)
        omega = density(random_density_mat(rng, 2), single_party(2, "2"))
        mu = density(random_density_mat(rng, 2), single_party(2, "2"))
        swap = np.eye(4)[[0, 2, 1, 3]].astype(complex)
        prep2 = ch.product_channel(
            [ch.identity_channel(single_party(2)), ch.prepare_channel(omega, single_party(2))],
            ["1", "2"],
        )
        lam = ch.compose(prep2, ch.unitary_channel(swap, S12))
        marg = ch.marginal_channel(lam, "1", {"2": mu})
        for i in range(2):
            for j in range(2):
                unit = np.zeros((2, 2), dtype=complex)
                unit[i, j] = 1.0
                expected = unit.trace() * mu.mat
                assert np.max(np.abs(marg.apply_mat(unit) - expected)) < 1e-12

    def test_direct_matches_choi(self):
        rng = np.random.default_rng(6)
        raw = ch.random_channel(rng, 4, 4, 3)
        lam = ch.KrausChannel(raw.kraus, S12, S12)
        frozen = {"2": density(random_density_mat(rng, 2), single_party(2, "2"))}
        direct = ch.marginal_channel(lam, "1", frozen, method="direct")
        via_choi = ch.marginal_channel(lam, "1", frozen, method="choi")
        for i in range(2):
            for j in range(2):
                unit = np.zeros((2, 2), dtype=complex)
                unit[i, j] = 1.0
                assert np.max(np.abs(direct.apply_mat(unit) - via_choi.apply_mat(unit))) < 1e-11

    def test_missing_frozen_input(self):
        lam = ch.identity_channel(S12)
        with pytest.raises(ValueError):
            ch.marginal_channel(lam, "1", {})


class TestUnital:
    def test_unitary_is_unital(self):
        rng = np.random.default_rng(7)
        from hetres.qcore import random_unitary

        lam = ch.unitary_channel(random_unitary(rng, 3), single_party(3))
        assert ch.is_unital(lam)

    def test_constant_map_is_not(self):
        prep = ch.prepare_channel(pure_state(KET0, S1), S1)
        assert not ch.is_unital(prep)

    def test_dephasing_is_unital(self):
        deph = ch.KrausChannel(
            (np.diag([1.0, 0.0]).astype(complex), np.diag([0.0, 1.0]).astype(complex)),
            S1,
            S1,
        )
        assert ch.is_unital(deph)


class TestChoi:
    def test_kraus_roundtrip(self):
        rng = np.random.default_rng(8)
        lam = ch.random_channel(rng, 3, 2, 2)
        ops = ch.kraus_from_choi(ch.choi_matrix(lam), 3, 2)
        again = ch.KrausChannel(tuple(ops), lam.in_structure, lam.out_structure)
        rho = random_density_mat(rng, 3)
        assert np.max(np.abs(again.apply_mat(rho) - lam.apply_mat(rho))) < 1e-12


def _teleportation_protocol():
    """Shared-pair teleportation as a two-round protocol: party B measures
    its two qubits in the maximally entangled basis, party A applies the
    conditioned correction."""
    struct = TensorStructure([("A", 2), ("B", 4)])
    v = bell_phi_plus_vec(2)
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    z = np.diag([1.0, -1.0]).astype(complex)
    paulis = [np.eye(2, dtype=complex), x, z, x @ z]
    bell_vecs = [np.kron(np.eye(2), p) @ v for p in paulis]
    measure = {"": [np.outer(b, b.conj()) for b in bell_vecs]}
    round1 = ch.lfocc_round(struct, "B", measure)
    corrections = {str(i): [p.conj().T] for i, p in enumerate(paulis)}
    round2 = ch.lfocc_round(struct, "A", corrections)
    return ch.LfoccProtocol(struct, (round1, round2))


class TestLfocc:
    def test_identity_rounds_compile_to_identity(self):
        struct = S12
        rnd = ch.lfocc_round(struct, "1", {"": [np.eye(2, dtype=complex)]})
        proto = ch.LfoccProtocol(struct, (rnd,))
        lam = ch.compile_lfocc(proto)
        rng = np.random.default_rng(9)
        rho = random_density_mat(rng, 4)
        assert np.max(np.abs(lam.apply_mat(rho) - rho)) < 1e-12

    def test_teleportation_prepares_pure_state(self):
        proto = _teleportation_protocol()
        lam = ch.compile_lfocc(proto)
        rng = np.random.default_rng(10)
        psi = random_pure_vec(rng, 2)
        # input: shared pair on (A, first B qubit), teleported state on the
        # second B qubit
        v = bell_phi_plus_vec(2)
        inp = np.kron(np.outer(v, v.conj()), np.outer(psi, psi.conj()))
        perm = np.eye(8).reshape(2, 2, 2, 8)
        perm = np.transpose(perm, (0, 1, 2, 3)).reshape(8, 8)  # (A, b1, psi) already ordered
        out = lam.apply_mat(inp)
        marg_a = partial_trace_mat(out, (2, 4), [0])
        fidelity = float(np.real(psi.conj() @ marg_a @ psi))
        assert fidelity > 1 - 1e-10

    def test_compile_matches_branch_enumeration(self):
        rng = np.random.default_rng(11)
        struct = S12
        classes = {"1": th.Sio(), "2": th.RealOps()}
        proto = th.random_lfocc_protocol(rng, struct, classes, 3, order=["1", "2", "1"])
        lam = ch.compile_lfocc(proto)
        rho = random_density_mat(rng, 4)
        total = np.zeros((4, 4), dtype=complex)
        branches = [("", np.eye(4, dtype=complex))]
        for rnd in proto.rounds:
            nxt = []
            for hist, op in branches:
                for l, k in enumerate(rnd.branches[hist]):
                    nxt.append((f"{hist},{l}" if hist else str(l), k @ op))
            branches = nxt
        for _, op in branches:
            total += op @ rho @ op.conj().T
        assert np.max(np.abs(total - lam.apply_mat(rho))) < 1e-12

    def test_branch_cap(self):
        struct = S12
        fam = {"": [np.eye(2, dtype=complex) / np.sqrt(3)] * 3}
        rounds = []
        histories = [""]
        for r in range(5):
            branches = {}
            new_hist = []
            for h in histories:
                branches[h] = [np.eye(2, dtype=complex) / np.sqrt(3)] * 3
                for l in range(3):
                    new_hist.append(f"{h},{l}" if h else str(l))
            rounds.append(ch.lfocc_round(struct, "1", branches))
            histories = new_hist
        proto = ch.LfoccProtocol(struct, tuple(rounds))
        with pytest.raises(ValueError, match="branch cap"):
            ch.compile_lfocc(proto)

    def test_missing_history_rejected(self):
        struct = S12
        r1 = ch.lfocc_round(struct, "1", {"": [np.eye(2, dtype=complex) / np.sqrt(2)] * 2})
        r2 = ch.lfocc_round(struct, "2", {"0": [np.eye(2, dtype=complex)]})
        proto = ch.LfoccProtocol(struct, (r1, r2))
        with pytest.raises(ValueError, match="history"):
            ch.compile_lfocc(proto)

    def test_nonlocal_round_rejected(self):
        struct = S12
        cnot = np.array(
            [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
        )
        with pytest.raises(ValueError, match="acts outside"):
            ch.LfoccProtocol(struct, (ch.LfoccRound("1", {"": (cnot,)}),))


class TestEffectivePovm:
    def test_identity_channel_returns_same_element(self):
        lam = ch.identity_channel(single_party(2, "A"))
        p = np.array([[0.7, 0.1], [0.1, 0.2]], dtype=complex)
        assert np.max(np.abs(ch.effective_povm(lam, p, "A") - p)) < 1e-12

    def test_swap_moves_element(self):
        swap = np.eye(4)[[0, 2, 1, 3]].astype(complex)
        lam = ch.unitary_channel(swap, TensorStructure([("A", 2), ("B", 2)]))
        p = np.array([[0.6, 0.2j], [-0.2j, 0.3]], dtype=complex)
        eff = ch.effective_povm(lam, p, "B")
        assert np.max(np.abs(eff - p)) < 1e-12

    def test_sio_real_protocols_give_diagonal_elements(self):
        rng = np.random.default_rng(12)
        struct = S12
        classes = {"1": th.Sio(), "2": th.RealOps()}
        for _ in range(40):
            proto = th.random_lfocc_protocol(
                rng, struct, classes, int(rng.integers(1, 4)), order=["1", "2", "1"]
            )
            lam = ch.compile_lfocc(proto)
            p = random_density_mat(rng, 2)
            eff = ch.effective_povm(lam, p, "2")
            off = eff - np.diag(np.diag(eff))
            assert np.max(np.abs(off)) < 1e-10
            w = np.linalg.eigvalsh(eff)
            assert w[0] > -1e-10 and w[-1] < 1 + 1e-10

    def test_element_bounds_validated(self):
        lam = ch.identity_channel(single_party(2, "A"))
        with pytest.raises(ValueError):
            ch.effective_povm(lam, 2.0 * np.eye(2), "A")


class TestPovmType:
    def test_valid(self):
        p = np.diag([0.4, 0.7]).astype(complex)
        povm = ch.binary_povm(p)
        assert len(povm.elements) == 2

    def test_not_summing_rejected(self):
        with pytest.raises(ValueError):
            ch.Povm((np.eye(2) * 0.5, np.eye(2) * 0.4))

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            ch.Povm((np.diag([1.5, 0.0]), np.diag([-0.5, 1.0])))


def test_channel_json_roundtrip():
    rng = np.random.default_rng(13)
    lam = ch.random_channel(rng, 2, 3, 2)
    again = ch.channel_from_json(lam.to_json())
    rho = random_density_mat(rng, 2)
    assert np.max(np.abs(again.apply_mat(rho) - lam.apply_mat(rho))) < 1e-12
