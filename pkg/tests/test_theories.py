import numpy as np
import pytest

from hetres import channels as ch
from hetres import theories as th
from hetres.qcore import (
    CNOT,
    KET_PLUS,
    KET_PLUS_Y,
    PAULI_X,
    bell_phi_plus_vec,
    partial_trace_mat,
    pure_state,
    random_density_mat,
    relative_entropy,
    single_party,
)

PHI = np.outer(bell_phi_plus_vec(2), bell_phi_plus_vec(2).conj())
PLUS = np.outer(KET_PLUS, KET_PLUS.conj())
PLUS_Y = np.outer(KET_PLUS_Y, KET_PLUS_Y.conj())


class TestMembership:
    def test_mixed_is_incoherent(self):
        assert th.Incoherent(2).contains(np.eye(2) / 2)

    def test_plus_y_is_not_real(self):
        assert not th.RealStates(2).contains(PLUS_Y)
        assert th.RealStates(2).contains(PLUS)

    def test_bell_not_separable(self):
        assert not th.SeparableTwoQubit().contains(PHI)

    def test_separable_cut_restriction(self):
        with pytest.raises(ValueError):
            th.SeparableTwoQubit((3, 3))

    def test_qubit_qutrit_cut(self):
        sep = th.SeparableTwoQubit((2, 3))
        rng = np.random.default_rng(23)
        for _ in range(20):
            assert sep.contains(sep.random_state(rng), 1e-8)
        # a maximally entangled qubit pair embedded in the 2x3 cut
        vec = np.zeros(6, dtype=complex)
        vec[0] = vec[4] = 1.0 / np.sqrt(2.0)  # |0>|0> + |1>|1> with a 3-level side
        embedded = np.outer(vec, vec.conj())
        assert not sep.contains(embedded, 1e-8)
        mu = sep.lmo(-embedded, rng)
        assert float(np.real(np.trace(mu @ embedded))) <= 0.5 + 1e-9

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            th.Incoherent(2).contains(np.eye(4) / 4)


class TestLinearMinimization:
    def test_incoherent_picks_smallest_diagonal(self):
        mu = th.Incoherent(2).lmo(np.diag([0.3, -0.2]).astype(complex))
        assert np.allclose(mu, np.diag([0.0, 1.0]))

    def test_singleton_returns_its_state(self):
        gamma = np.diag([0.8, 0.2]).astype(complex)
        assert np.allclose(th.Singleton(gamma).lmo(np.eye(2)), gamma)

    def test_separable_overlap_with_bell_is_half(self):
        # independent oracle: dense grid over product Bloch angles
        best_grid = 0.0
        angles = np.linspace(0, np.pi, 25)
        phases = np.linspace(0, 2 * np.pi, 25)
        for ta in angles:
            for pa in phases:
                a = np.array([np.cos(ta / 2), np.exp(1j * pa) * np.sin(ta / 2)])
                for tb in angles:
                    for pb in phases:
                        b = np.array([np.cos(tb / 2), np.exp(1j * pb) * np.sin(tb / 2)])
                        v = np.kron(a, b)
                        best_grid = max(best_grid, float(np.real(v.conj() @ PHI @ v)))
        assert best_grid <= 0.5 + 1e-9
        rng = np.random.default_rng(0)
        mu = th.SeparableTwoQubit().lmo(-PHI, rng)
        overlap = float(np.real(np.trace(mu @ PHI)))
        assert abs(overlap - 0.5) < 1e-9
        assert overlap >= best_grid - 1e-9

    def test_incoherent_rotated_basis(self):
        h = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
        inc_h = th.Incoherent(2, basis=h)
        assert inc_h.contains(PLUS)
        assert not inc_h.contains(np.diag([1.0, 0.0]))
        sigma, val = inc_h.closest_free_state(np.diag([1.0, 0.0]).astype(complex))
        assert abs(val - 1.0) < 1e-12
        assert np.allclose(sigma, np.eye(2) / 2)
        rng = np.random.default_rng(17)
        for _ in range(20):
            assert inc_h.contains(inc_h.random_state(rng), 1e-9)

    def test_real_lmo_minimizes_real_part(self):
        rng = np.random.default_rng(1)
        g = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        g = 0.5 * (g + g.conj().T)
        mu = th.RealStates(3).lmo(g)
        target = np.linalg.eigvalsh(0.5 * (np.real(g) + np.real(g).T))[0]
        assert abs(float(np.real(np.trace(g @ mu))) - target) < 1e-10


class TestClosestFreeState:
    def test_plus_against_incoherent(self):
        sigma, val = th.Incoherent(2).closest_free_state(PLUS)
        assert np.allclose(sigma, np.eye(2) / 2)
        assert abs(val - 1.0) < 1e-12

    def test_member_distance_zero(self):
        rng = np.random.default_rng(2)
        mu = th.Incoherent(3).random_state(rng)
        _, val = th.Incoherent(3).closest_free_state(mu)
        assert abs(val) < 1e-10

    def test_plus_y_against_incoherent(self):
        sigma, val = th.Incoherent(2).closest_free_state(PLUS_Y)
        assert np.allclose(sigma, np.eye(2) / 2)
        assert abs(val - 1.0) < 1e-12

    def test_plus_y_against_real(self):
        sigma, val = th.RealStates(2).closest_free_state(PLUS_Y)
        assert np.allclose(sigma, np.eye(2) / 2)
        assert abs(val - 1.0) < 1e-12

    def test_incoherent_closed_form_never_beaten(self):
        rng = np.random.default_rng(3)
        for dim in (2, 3):
            inc = th.Incoherent(dim)
            for _ in range(50):
                rho = random_density_mat(rng, dim)
                _, closed = inc.closest_free_state(rho)
                for _ in range(40):
                    mu = inc.random_state(rng)
                    assert relative_entropy(rho, mu) >= closed - 1e-9


class TestOpClasses:
    def test_pauli_x_preserves_only_the_point(self):
        x_chan = ch.unitary_channel(PAULI_X, single_party(2, "A"))
        assert th.Rng(th.Singleton(np.eye(2) / 2)).verify(x_chan).ok
        finite = th.FiniteSet([np.eye(2) / 2, np.diag([1.0, 0.0])])
        verdict = th.Rng(finite).verify(x_chan)
        assert not verdict.ok
        assert "2 states" in verdict.describe()

    def test_prepare_channel_rng_cases(self):
        prep = ch.prepare_channel(pure_state(KET_PLUS), single_party(2, "A"))
        assert th.Rng(th.AllStates(2)).verify(prep).ok
        assert not th.Rng(th.Singleton(np.diag([1.0, 0.0]))).verify(prep).ok

    def test_cnot_is_real(self):
        lam = ch.unitary_channel(CNOT, single_party(4, "A"))
        assert th.op_in_class(lam, th.RealOps())

    def test_dephasing_is_sio(self):
        deph = ch.KrausChannel(
            (np.diag([1.0, 0.0]).astype(complex), np.diag([0.0, 1.0]).astype(complex)),
            single_party(2),
            single_party(2),
        )
        assert th.op_in_class(deph, th.Sio())

    def test_sio_normal_form_closed_under_products(self):
        rng = np.random.default_rng(4)
        sio = th.Sio()
        for _ in range(100):
            a = sio.sample_channel(rng, 3).kraus[0]
            b = sio.sample_channel(rng, 3).kraus[0]
            assert sio.kraus_ok(a @ b)

    def test_rng_closed_under_mixing(self):
        rng = np.random.default_rng(5)
        inc = th.Incoherent(2)
        checker = th.Rng(inc)
        sio = th.Sio()
        for _ in range(20):
            c1 = sio.sample_channel(rng, 2)
            c2 = sio.sample_channel(rng, 2)
            assert checker.verify(c1).ok and checker.verify(c2).ok
            w = float(rng.uniform(0.1, 0.9))
            mixed = ch.KrausChannel(
                tuple(np.sqrt(w) * k for k in c1.kraus)
                + tuple(np.sqrt(1 - w) * k for k in c2.kraus),
                c1.in_structure,
                c1.out_structure,
            )
            assert checker.verify(mixed).ok

    def test_unital_class(self):
        rng = np.random.default_rng(6)
        lam = th.UnitalOps().sample_channel(rng, 3)
        assert th.op_in_class(lam, th.UnitalOps())
        prep = ch.prepare_channel(pure_state(KET_PLUS), single_party(2))
        assert not th.op_in_class(prep, th.UnitalOps())


class TestSamplers:
    @pytest.mark.parametrize(
        "factory",
        [
            lambda: th.Incoherent(3),
            lambda: th.RealStates(3),
            lambda: th.Singleton(np.diag([0.6, 0.4])),
            lambda: th.AllStates(4),
            lambda: th.SeparableTwoQubit(),
            lambda: th.FiniteSet([np.eye(2) / 2, np.diag([1.0, 0.0])]),
        ],
        ids=["incoherent", "real", "singleton", "all", "separable", "finite"],
    )
    def test_random_states_pass_membership(self, factory):
        free_set = factory()
        for seed in range(2000):
            state = th.random_free_state(free_set, seed)
            assert free_set.contains(state.mat, 1e-8)

    def test_composite_samplers_pass_membership(self):
        mc = th.MinComposite([th.Incoherent(2), th.SeparableTwoQubit()])
        rng = np.random.default_rng(7)
        for _ in range(60):
            assert mc.contains(mc.random_state(rng), 1e-6)
        xc = th.MaxComposite([th.Incoherent(2), th.Incoherent(2)])
        for _ in range(300):
            assert xc.contains(xc.random_state(rng), 1e-7)

    def test_max_composite_sampler_reaches_correlated_states(self):
        xc = th.MaxComposite([th.Singleton(np.eye(2) / 2), th.Singleton(np.eye(2) / 2)])
        rng = np.random.default_rng(8)
        seen_correlated = False
        for _ in range(50):
            m = xc.random_state(rng)
            prod = np.kron(
                partial_trace_mat(m, (2, 2), [0]), partial_trace_mat(m, (2, 2), [1])
            )
            if np.max(np.abs(m - prod)) > 1e-3:
                seen_correlated = True
        assert seen_correlated


class TestComposites:
    def test_min_composite_contains_bell_fails(self):
        mc = th.MinComposite([th.AllStates(2), th.AllStates(2)])
        assert not mc.contains(PHI, 1e-6)
        assert mc.contains(np.eye(4) / 4, 1e-6)

    def test_min_composite_singleton_fast_path(self):
        mc = th.MinComposite(
            [th.MaxComposite([th.Singleton(np.eye(2) / 2), th.Singleton(np.eye(2) / 2)]),
             th.Singleton(np.eye(4) / 4)],
            labels=["c0", "c1"],
        )
        ok = np.kron(PHI, np.eye(4) / 4)
        assert mc.contains(ok, 1e-8)
        assert not mc.contains(np.kron(PHI, PHI), 1e-6)

    def test_max_composite_membership_is_marginal_check(self):
        xc = th.MaxComposite([th.Singleton(np.eye(2) / 2), th.Singleton(np.eye(2) / 2)])
        assert xc.contains(PHI, 1e-8)
        assert not xc.contains(np.kron(np.diag([1.0, 0.0]), np.eye(2) / 2), 1e-6)

    def test_max_composite_lmo_feasible_and_minimizing(self):
        xc = th.MaxComposite([th.Incoherent(2), th.Incoherent(2)])
        rng = np.random.default_rng(9)
        g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        g = 0.5 * (g + g.conj().T)
        mu = xc.lmo(g, iters=150)
        assert xc.contains(mu, 1e-5)
        # must do at least as well as the best product of local frees
        probe = np.kron(
            th.Incoherent(2).lmo(partial_trace_mat(g @ np.kron(np.eye(2), np.eye(2) / 2), (2, 2), [0])),
            np.eye(2) / 2,
        )
        assert float(np.real(np.trace(g @ mu))) <= float(np.real(np.trace(g @ probe))) + 1e-4


def test_theory_descriptor_roundtrip():
    sets = [
        th.Incoherent(3),
        th.RealStates(2),
        th.Singleton(np.diag([0.7, 0.3])),
        th.SeparableTwoQubit(),
        th.MinComposite([th.Incoherent(2), th.Incoherent(2)]),
        th.MaxComposite([th.Incoherent(2), th.RealStates(2)]),
    ]
    for s in sets:
        again = th.set_from_json(s.to_json())
        assert again.kind == s.kind
        assert again.dim == s.dim
