"""Catalog of local resource theories.

A :class:`FreeStateSet` describes a convex, closed set of density matrices
through three capabilities: membership testing, linear minimization over the
set (the oracle the divergence engines call), and, where one exists, a
closed-form closest free state.  A :class:`FreeOpClass` is a decidable
predicate on explicit Kraus families.

SIO and real-operation membership are decided on the Kraus representation
that is handed in; the predicates are representation dependent and results
are reported as verdicts on the given decomposition, not as universal proofs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import channels as ch
from .qcore import (
    DensityOperator,
    TensorStructure,
    as_complex,
    check_hermitian,
    partial_trace_mat,
    partial_transpose_mat,
    random_density_mat,
    random_pure_vec,
    random_unitary,
    relative_entropy,
    single_party,
    trace_norm,
    von_neumann_entropy,
)

MEMBERSHIP_TOL = 1e-6
SEESAW_RESTARTS = 20


def _mat(x) -> np.ndarray:
    return x.mat if isinstance(x, DensityOperator) else as_complex(x)


class FreeStateSet:
    """Base descriptor; concrete kinds override the capability methods."""

    kind = "abstract"
    has_closed_form_closest = False
    has_extreme_point_oracle = False
    has_linear_membership = False
    is_convex = True

    def __init__(self, dim: int):
        self.dim = int(dim)

    def contains(self, rho, tol: float = MEMBERSHIP_TOL) -> bool:
        raise NotImplementedError

    def lmo(self, grad: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
        """A state mu in the set minimizing Tr(grad mu), within oracle tolerance."""
        raise NotImplementedError(f"{self.kind} has no extreme-point oracle")

    def closest_free_state(self, rho) -> tuple[np.ndarray, float]:
        raise NotImplementedError(f"{self.kind} has no closed-form closest state")

    def random_state(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def full_rank_state(self) -> np.ndarray | None:
        return None

    def verification_states(self, rng: np.random.Generator, n: int) -> tuple[list[np.ndarray], str]:
        """States whose preservation certifies (or samples) RNG membership."""
        raise NotImplementedError

    def marginal_projection(self, m: np.ndarray) -> np.ndarray:
        """Frobenius projection of a candidate marginal onto the set's linear
        or cone part (PSD and trace handled globally by the caller)."""
        raise NotImplementedError(f"{self.kind} cannot be used as a marginal constraint")

    def to_json(self) -> dict:
        return {"kind": self.kind, "dim": self.dim}

    def _check_dim(self, m: np.ndarray):
        if m.shape[0] != self.dim:
            raise ValueError(f"dimension mismatch: state {m.shape[0]}, set {self.dim}")


class Incoherent(FreeStateSet):
    """Diagonal states in a fixed orthonormal basis."""

    kind = "incoherent"
    has_closed_form_closest = True
    has_extreme_point_oracle = True
    has_linear_membership = True

    def __init__(self, dim: int, basis: np.ndarray | None = None):
        super().__init__(dim)
        self.basis = None if basis is None else as_complex(basis)

    def _to_frame(self, m: np.ndarray) -> np.ndarray:
        return m if self.basis is None else self.basis.conj().T @ m @ self.basis

    def _from_frame(self, m: np.ndarray) -> np.ndarray:
        return m if self.basis is None else self.basis @ m @ self.basis.conj().T

    def contains(self, rho, tol: float = MEMBERSHIP_TOL) -> bool:
        m = self._to_frame(_mat(rho))
        self._check_dim(m)
        off = m - np.diag(np.diag(m))
        return float(np.max(np.abs(off))) <= tol

    def lmo(self, grad, rng=None):
        g = self._to_frame(as_complex(grad))
        i = int(np.argmin(np.real(np.diag(g))))
        proj = np.zeros((self.dim, self.dim), dtype=complex)
        proj[i, i] = 1.0
        return self._from_frame(proj)

    def closest_free_state(self, rho):
        m = _mat(rho)
        self._check_dim(m)
        deph = self._from_frame(np.diag(np.diag(self._to_frame(m))))
        return deph, von_neumann_entropy(deph) - von_neumann_entropy(m)

    def random_state(self, rng):
        p = rng.dirichlet(np.ones(self.dim))
        return self._from_frame(np.diag(p).astype(complex))

    def full_rank_state(self):
        return np.eye(self.dim, dtype=complex) / self.dim

    def extreme_points(self) -> list[np.ndarray]:
        return [
            self._from_frame(np.diag(np.eye(self.dim)[i]).astype(complex))
            for i in range(self.dim)
        ]

    def verification_states(self, rng, n):
        return self.extreme_points(), "extreme-points"

    def marginal_projection(self, m):
        f = self._to_frame(m)
        return self._from_frame(np.diag(np.diag(f)))

    def to_json(self):
        out = {"kind": self.kind, "dim": self.dim}
        if self.basis is not None:
            from .qcore import mat_to_json

            out["basis"] = mat_to_json(self.basis)
        return out


class RealStates(FreeStateSet):
    """States with real matrix elements in the computational basis."""

    kind = "real"
    has_closed_form_closest = True
    has_extreme_point_oracle = True
    has_linear_membership = True

    def contains(self, rho, tol: float = MEMBERSHIP_TOL) -> bool:
        m = _mat(rho)
        self._check_dim(m)
        return float(np.max(np.abs(np.imag(m)))) <= tol

    def lmo(self, grad, rng=None):
        # Tr(G mu) for a real symmetric mu only sees the real part of G.
        r = np.real(as_complex(grad))
        r = 0.5 * (r + r.T)
        w, v = np.linalg.eigh(r)
        vec = np.real(v[:, 0])
        vec = vec / np.linalg.norm(vec)
        return np.outer(vec, vec).astype(complex)

    def closest_free_state(self, rho):
        m = _mat(rho)
        self._check_dim(m)
        re = np.real(m).astype(complex)
        return re, von_neumann_entropy(re) - von_neumann_entropy(m)

    def random_state(self, rng):
        g = rng.normal(size=(self.dim, self.dim))
        m = g @ g.T
        return (m / np.trace(m)).astype(complex)

    def full_rank_state(self):
        return np.eye(self.dim, dtype=complex) / self.dim

    def verification_states(self, rng, n):
        out = [np.diag(np.eye(self.dim)[i]).astype(complex) for i in range(self.dim)]
        while len(out) < n:
            v = rng.normal(size=self.dim)
            v = v / np.linalg.norm(v)
            out.append(np.outer(v, v).astype(complex))
        return out, "sampled"

    def marginal_projection(self, m):
        return np.real(m).astype(complex)


class Singleton(FreeStateSet):
    """A single free state (Gibbs-preserving style theories)."""

    kind = "singleton"
    has_closed_form_closest = True
    has_extreme_point_oracle = True
    has_linear_membership = True

    def __init__(self, gamma):
        g = _mat(gamma)
        super().__init__(g.shape[0])
        self.gamma = g

    def contains(self, rho, tol: float = MEMBERSHIP_TOL) -> bool:
        m = _mat(rho)
        self._check_dim(m)
        return trace_norm(m - self.gamma) <= tol

    def lmo(self, grad, rng=None):
        return self.gamma

    def closest_free_state(self, rho):
        m = _mat(rho)
        self._check_dim(m)
        return self.gamma, relative_entropy(m, self.gamma)

    def random_state(self, rng):
        return self.gamma

    def full_rank_state(self):
        w = np.linalg.eigvalsh(self.gamma)
        return self.gamma if w[0] > 1e-12 else None

    def verification_states(self, rng, n):
        return [self.gamma], "extreme-points"

    def extreme_points(self) -> list[np.ndarray]:
        return [self.gamma]

    def marginal_projection(self, m):
        return self.gamma

    def to_json(self):
        from .qcore import mat_to_json

        return {"kind": self.kind, "dim": self.dim, "gamma": mat_to_json(self.gamma)}


class AllStates(FreeStateSet):
    """No restriction: every density matrix is free."""

    kind = "all"
    has_closed_form_closest = True
    has_extreme_point_oracle = True
    has_linear_membership = True

    def contains(self, rho, tol: float = MEMBERSHIP_TOL) -> bool:
        self._check_dim(_mat(rho))
        return True

    def lmo(self, grad, rng=None):
        w, v = np.linalg.eigh(check_hermitian(grad, tol=1e-8))
        vec = v[:, 0]
        return np.outer(vec, vec.conj())

    def closest_free_state(self, rho):
        m = _mat(rho)
        return m, 0.0

    def random_state(self, rng):
        return random_density_mat(rng, self.dim)

    def full_rank_state(self):
        return np.eye(self.dim, dtype=complex) / self.dim

    def verification_states(self, rng, n):
        return [np.outer(v := random_pure_vec(rng, self.dim), v.conj()) for _ in range(n)], "sampled"

    def marginal_projection(self, m):
        return m


class FiniteSet(FreeStateSet):
    """An explicit finite list of states.

    Not convex in general; it exists to express resource non-generation with
    respect to small hand-picked sets, and divergences over it reduce to a
    minimum over the list.
    """

    kind = "finite"
    has_closed_form_closest = True
    has_extreme_point_oracle = True
    has_linear_membership = True
    is_convex = False

    def __init__(self, states: Sequence):
        mats = [_mat(s) for s in states]
        if not mats:
            raise ValueError("finite set needs at least one state")
        super().__init__(mats[0].shape[0])
        self.states = mats

    def contains(self, rho, tol: float = MEMBERSHIP_TOL) -> bool:
        m = _mat(rho)
        self._check_dim(m)
        return min(trace_norm(m - s) for s in self.states) <= tol

    def lmo(self, grad, rng=None):
        vals = [float(np.real(np.trace(as_complex(grad) @ s))) for s in self.states]
        return self.states[int(np.argmin(vals))]

    def closest_free_state(self, rho):
        m = _mat(rho)
        best = min(self.states, key=lambda s: relative_entropy(m, s))
        return best, relative_entropy(m, best)

    def random_state(self, rng):
        return self.states[int(rng.integers(len(self.states)))]

    def verification_states(self, rng, n):
        return list(self.states), "extreme-points"

    def extreme_points(self) -> list[np.ndarray]:
        return list(self.states)

    def to_json(self):
        from .qcore import mat_to_json

        return {"kind": self.kind, "dim": self.dim,
                "states": [mat_to_json(s) for s in self.states]}


class SeparableTwoQubit(FreeStateSet):
    """Separable states across a 2x2 (or 2x3) cut, where PPT is exact."""

    kind = "separable"
    has_extreme_point_oracle = True
    has_linear_membership = True

    def __init__(self, cut: tuple[int, int] = (2, 2)):
        if tuple(sorted(cut)) not in {(2, 2), (2, 3)}:
            raise ValueError("PPT is an exact separability test only for 2x2 and 2x3 cuts")
        super().__init__(cut[0] * cut[1])
        self.cut = (int(cut[0]), int(cut[1]))

    def contains(self, rho, tol: float = MEMBERSHIP_TOL) -> bool:
        m = _mat(rho)
        self._check_dim(m)
        pt = partial_transpose_mat(m, self.cut, 1)
        return float(np.linalg.eigvalsh(pt)[0]) >= -tol

    def lmo(self, grad, rng=None, restarts: int = SEESAW_RESTARTS):
        return _product_seesaw(as_complex(grad), self.cut, rng, restarts)

    def lmo_with_parts(self, grad, rng=None, restarts: int | None = None, warm=None):
        restarts = SEESAW_RESTARTS if restarts is None else restarts
        return _product_seesaw(
            as_complex(grad), self.cut, rng, restarts, warm=warm, return_parts=True
        )

    def random_state(self, rng):
        d1, d2 = self.cut
        k = int(rng.integers(1, 9))
        w = rng.dirichlet(np.ones(k))
        m = np.zeros((self.dim, self.dim), dtype=complex)
        for i in range(k):
            a = random_pure_vec(rng, d1)
            b = random_pure_vec(rng, d2)
            v = np.kron(a, b)
            m += w[i] * np.outer(v, v.conj())
        return m

    def full_rank_state(self):
        return np.eye(self.dim, dtype=complex) / self.dim

    def verification_states(self, rng, n):
        out = []
        d1, d2 = self.cut
        for _ in range(n):
            a = random_pure_vec(rng, d1)
            b = random_pure_vec(rng, d2)
            v = np.kron(a, b)
            out.append(np.outer(v, v.conj()))
        return out, "sampled"

    def marginal_projection(self, m):
        pt = partial_transpose_mat(m, self.cut, 1)
        w, v = np.linalg.eigh(check_hermitian(pt, tol=1e-8))
        clipped = (v * np.clip(w, 0.0, None)) @ v.conj().T
        return partial_transpose_mat(clipped, self.cut, 1)

    def to_json(self):
        return {"kind": self.kind, "dim": self.dim, "cut": list(self.cut)}


def _product_seesaw(grad, dims, rng, restarts, sweeps: int = 30, tol: float = 1e-12,
                    warm: list | None = None, return_parts: bool = False):
    """Minimize <a (x) b| G |a (x) b> by alternating eigenvector updates.

    ``warm`` optionally supplies (a, b) vector pairs used as extra starts."""
    rng = rng or np.random.default_rng(0)
    d1, d2 = dims
    g4 = grad.reshape(d1, d2, d1, d2)
    starts = list(warm or [])
    for _ in range(max(1, restarts)):
        starts.append((random_pure_vec(rng, d1), random_pure_vec(rng, d2)))
    best_val, best_ab = np.inf, None
    for a, b in starts:
        prev = np.inf
        val = np.inf
        for _ in range(sweeps):
            ga = np.einsum("ikjl,k,l->ij", g4, b.conj(), b)
            _, va = np.linalg.eigh(0.5 * (ga + ga.conj().T))
            a = va[:, 0]
            gb = np.einsum("ikjl,i,j->kl", g4, a.conj(), a)
            _, vb = np.linalg.eigh(0.5 * (gb + gb.conj().T))
            b = vb[:, 0]
            val = float(np.real(np.einsum("ikjl,i,k,j,l", g4, a.conj(), b.conj(), a, b)))
            if prev - val < tol:
                break
            prev = val
        if val < best_val:
            best_val, best_ab = val, (a, b)
    a, b = best_ab
    v = np.kron(a, b)
    state = np.outer(v, v.conj())
    return (state, [best_ab]) if return_parts else state


# ---------------------------------------------------------------------------
# composite extremal sets


class MinComposite(FreeStateSet):
    """Convex hull of tensor products of locally free states."""

    kind = "min-composite"
    has_extreme_point_oracle = True

    def __init__(self, locals_: Sequence[FreeStateSet], labels: Sequence[str] | None = None):
        if len(locals_) < 2:
            raise ValueError("a composite needs at least two parties")
        self.locals = list(locals_)
        labels = list(labels) if labels else [str(i + 1) for i in range(len(locals_))]
        self.structure = TensorStructure(zip(labels, [s.dim for s in locals_]))
        super().__init__(self.structure.dim)
        self.seesaw_restarts = SEESAW_RESTARTS

    @property
    def local_dims(self) -> tuple[int, ...]:
        return self.structure.dims

    def lmo(self, grad, rng=None, restarts: int | None = None):
        return self._seesaw(grad, rng, restarts)[0]

    def lmo_with_parts(self, grad, rng=None, restarts: int | None = None, warm=None):
        return self._seesaw(grad, rng, restarts, warm)

    def _enumerable_side(self) -> int | None:
        if len(self.locals) != 2:
            return None
        for side in (0, 1):
            if hasattr(self.locals[side], "extreme_points"):
                return side
        return None

    def _seesaw(self, grad, rng, restarts, warm=None):
        rng = rng or np.random.default_rng(0)
        restarts = self.seesaw_restarts if restarts is None else restarts
        g = as_complex(grad)
        dims = self.local_dims
        side = self._enumerable_side()
        if side is not None:
            # one party has finitely many extreme points: enumerate them and
            # solve the other party's subproblem exactly or by its own oracle
            other_idx = 1 - side
            other = self.locals[other_idx]
            best_val, best_pair, new_warm = np.inf, None, []
            for point in self.locals[side].extreme_points():
                parts = [None, None]
                parts[side] = point
                h = _effective_local_operator(g, dims, parts, other_idx)
                if hasattr(other, "lmo_with_parts"):
                    mu, w2 = other.lmo_with_parts(h, rng, restarts=restarts, warm=warm)
                    new_warm.extend(w2)
                else:
                    mu = other.lmo(h, rng)
                val = float(np.real(np.trace(h @ mu)))
                if val < best_val:
                    best_val, best_pair = val, (point, mu)
            parts = [None, None]
            parts[side], parts[other_idx] = best_pair
            full = np.kron(parts[0], parts[1])
            return full, (new_warm or warm or [])
        n = len(dims)
        starts = [list(parts) for parts in (warm or [])]
        for _ in range(max(1, restarts)):
            starts.append([s.random_state(rng) for s in self.locals])
        best_val, best, best_parts = np.inf, None, None
        for parts in starts:
            prev = np.inf
            val = np.inf
            for _ in range(30):
                for i in range(n):
                    h = _effective_local_operator(g, dims, parts, i)
                    parts[i] = _local_lmo(self.locals[i], h, rng)
                full = parts[0]
                for p in parts[1:]:
                    full = np.kron(full, p)
                val = float(np.real(np.trace(g @ full)))
                if prev - val < 1e-12:
                    break
                prev = val
            if val < best_val:
                best_val, best, best_parts = val, full, parts
        return best, [best_parts]

    def contains(self, rho, tol: float = MEMBERSHIP_TOL) -> bool:
        m = _mat(rho)
        self._check_dim(m)
        fast = self._singleton_fast_path(m, tol)
        if fast is None:
            fast = self._structured_fast_path(m, tol)
        if fast is not None:
            return fast
        dist, _ = self.hull_distance(m, tol=0.5 * tol)
        return dist <= tol

    def _structured_fast_path(self, m, tol):
        """Exact membership where the hull has a closed characterization.

        With an incoherent factor the hull is exactly the block-diagonal
        states whose conditional blocks lie in the other party's hull; with
        two unrestricted qubit factors it is the separable set, where the
        partial-transpose test is exact.
        """
        if len(self.locals) != 2:
            return None
        dims = self.local_dims
        if all(isinstance(s, AllStates) for s in self.locals) and tuple(sorted(dims)) in {
            (2, 2),
            (2, 3),
        }:
            pt = partial_transpose_mat(m, dims, 1)
            return bool(np.linalg.eigvalsh(pt)[0] >= -tol)
        for side in (0, 1):
            local = self.locals[side]
            if not (isinstance(local, Incoherent) and local.basis is None):
                continue
            other = self.locals[1 - side]
            t = m.reshape(dims + dims)
            for i in range(dims[side]):
                for j in range(dims[side]):
                    if i == j:
                        continue
                    block = t[i, :, j, :] if side == 0 else t[:, i, :, j]
                    if float(np.max(np.abs(block))) > tol:
                        return False
            for i in range(dims[side]):
                block = t[i, :, i, :] if side == 0 else t[:, i, :, i]
                p = float(np.real(np.trace(block)))
                if p <= 1e-12:
                    continue
                if not other.contains(block / p, max(tol, tol / max(p, 1e-6))):
                    return False
            return True
        return None

    def _singleton_fast_path(self, m, tol):
        # conv{A (x) {gamma}} = conv{A} (x) {gamma}: with at most one
        # non-singleton factor, membership reduces to a marginal check.
        non_single = [i for i, s in enumerate(self.locals) if s.kind != "singleton"]
        if len(non_single) > 1:
            return None
        dims = self.local_dims
        if non_single:
            i = non_single[0]
            marg = partial_trace_mat(m, dims, [i])
            if not self.locals[i].contains(marg, tol):
                return False
        else:
            i, marg = 0, partial_trace_mat(m, dims, [0])
        recon = np.array([[1.0 + 0j]])
        for j, s in enumerate(self.locals):
            recon = np.kron(recon, marg if j == i else s.gamma)
        return trace_norm(m - recon) <= max(tol, 10 * MEMBERSHIP_TOL)

    def _marginal_product_atom(self, m: np.ndarray) -> np.ndarray | None:
        # marginals of hull members are locally free, so their product is a
        # valid hull point (and an exact fit for product inputs); for a
        # non-member the marginals can leave the local sets, so validate
        dims = self.local_dims
        out = np.array([[1.0 + 0j]])
        for i, local in enumerate(self.locals):
            marg = partial_trace_mat(m, dims, [i])
            if not local.contains(marg, 1e-9):
                return None
            out = np.kron(out, marg)
        return out

    def _residual_atoms(self, residual: np.ndarray) -> list[np.ndarray]:
        # harvest hull points aligned with the positive eigendirections of
        # the residual: local projections of each eigenvector's marginals
        dims = self.local_dims
        w, v = np.linalg.eigh(0.5 * (residual + residual.conj().T))
        atoms = []
        for idx in np.argsort(w)[-2:]:
            if w[idx] <= 1e-12:
                continue
            vec = v[:, idx]
            pure = np.outer(vec, vec.conj())
            atom = np.array([[1.0 + 0j]])
            ok = True
            for i, local in enumerate(self.locals):
                marg = partial_trace_mat(pure, dims, [i])
                proj = _project_into_set(local, marg)
                if proj is None:
                    ok = False
                    break
                atom = np.kron(atom, proj)
            if ok:
                atoms.append(atom)
        return atoms

    def hull_distance(self, m: np.ndarray, max_atoms: int = 250, tol: float = 1e-9):
        """Fully corrective Frank-Wolfe distance (Frobenius) to the hull.

        Returns (distance, nearest point).  Distance below ``tol`` certifies
        membership at that resolution; outside points converge to the true
        distance with the oracle-gap stopping rule (reliable up to the
        see-saw heuristic inside the oracle).
        """
        rng = np.random.default_rng(7)
        warm = None
        atoms = [self._seesaw(-m, rng, 3, warm)[0]]
        seed_atom = self._marginal_product_atom(m)
        if seed_atom is not None:
            atoms.append(seed_atom)
        target = m.reshape(-1)
        dist, sigma = np.inf, atoms[0]
        prev_dist = np.inf
        stall_count = 0
        restarts = 8
        for _ in range(max_atoms):
            a_mat = np.stack([a.reshape(-1) for a in atoms], axis=1)
            weights = _simplex_nnls(a_mat, target)
            sigma = (a_mat @ weights).reshape(m.shape)
            grad = sigma - m
            dist = float(np.linalg.norm(grad))
            if dist <= tol:
                return dist, sigma
            # keep only the support: the active-set solve zeroes unused atoms
            keep = weights > 1e-14
            if keep.sum() >= 1 and not keep.all():
                atoms = [a for a, k in zip(atoms, keep) if k]
            stalled = dist > 0.97 * prev_dist
            flat = dist > 0.9995 * prev_dist
            stall_count = stall_count + 1 if flat else 0
            prev_dist = dist
            restarts = min(restarts + 4, 24) if stalled else 8
            new_atom, warm = self._seesaw(grad, rng, restarts, warm)
            gap = float(np.real(np.trace(grad @ (sigma - new_atom))))
            if gap <= 0.25 * tol * tol and stall_count >= 2:
                return dist, sigma
            if stall_count >= 10 and dist > 4.0 * tol:
                # ten escalated-restart rounds with a flat distance: report
                # the plateau value (an upper bound on the true distance)
                return dist, sigma
            if any(float(np.max(np.abs(new_atom - a))) < 1e-10 for a in atoms):
                new_atom, warm = self._seesaw(grad, rng, 24, None)
            atoms.append(new_atom)
            if stalled:
                atoms.extend(self._residual_atoms(m - sigma))
        return dist, sigma

    def random_state(self, rng):
        k = int(rng.integers(1, 9))
        w = rng.dirichlet(np.ones(k))
        m = np.zeros((self.dim, self.dim), dtype=complex)
        for i in range(k):
            prod = np.array([[1.0 + 0j]])
            for s in self.locals:
                prod = np.kron(prod, s.random_state(rng))
            m += w[i] * prod
        return m

    def full_rank_state(self):
        parts = [s.full_rank_state() for s in self.locals]
        if any(p is None for p in parts):
            return None
        out = np.array([[1.0 + 0j]])
        for p in parts:
            out = np.kron(out, p)
        return out

    def verification_states(self, rng, n):
        out = []
        for _ in range(n):
            prod = np.array([[1.0 + 0j]])
            for s in self.locals:
                pool, _ = s.verification_states(rng, 4)
                prod = np.kron(prod, pool[int(rng.integers(len(pool)))])
            out.append(prod)
        return out, "sampled"

    def to_json(self):
        return {
            "kind": self.kind,
            "dim": self.dim,
            "labels": list(self.structure.labels),
            "locals": [s.to_json() for s in self.locals],
        }


def _local_lmo(local, h, rng):
    # inner subproblems run with a small restart budget; the outer see-saw
    # restarts diversify
    if isinstance(local, SeparableTwoQubit):
        return local.lmo(h, rng, restarts=3)
    return local.lmo(h, rng)


def _effective_local_operator(g, dims, parts, i):
    """H with Tr[G (.. parts .. X at slot i ..)] = Tr[X H]."""
    full = np.array([[1.0 + 0j]])
    for j, d in enumerate(dims):
        full = np.kron(full, np.eye(d, dtype=complex) if j == i else parts[j])
    h = partial_trace_mat(g @ full, dims, [i])
    return 0.5 * (h + h.conj().T)


def _psd_state(x: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (x + x.conj().T))
    out = (v * np.clip(w, 0.0, None)) @ v.conj().T
    return out / max(float(np.real(np.trace(out))), 1e-12)


def _project_into_set(local: FreeStateSet, marg: np.ndarray) -> np.ndarray | None:
    """A state inside the local set near ``marg``, or None if unavailable."""
    if isinstance(local, Incoherent):
        d = local.marginal_projection(marg)
        return local._from_frame(_psd_state(local._to_frame(d)))
    if isinstance(local, RealStates):
        return _psd_state(np.real(marg).astype(complex))
    if isinstance(local, Singleton):
        return local.gamma
    if isinstance(local, AllStates):
        return _psd_state(marg)
    if isinstance(local, FiniteSet):
        return min(local.states, key=lambda s: float(np.linalg.norm(s - marg)))
    if isinstance(local, SeparableTwoQubit):
        x = marg.copy()
        for _ in range(60):
            w, v = np.linalg.eigh(0.5 * (x + x.conj().T))
            x = (v * np.clip(w, 0.0, None)) @ v.conj().T
            x = x / max(float(np.real(np.trace(x))), 1e-12)
            x = local.marginal_projection(x)
        x = 0.5 * (x + x.conj().T)
        w, v = np.linalg.eigh(x)
        x = (v * np.clip(w, 0.0, None)) @ v.conj().T
        x = x / max(float(np.real(np.trace(x))), 1e-12)
        return x if local.contains(x, 1e-9) else None
    return None


def _nnls(a: np.ndarray, b: np.ndarray, max_iter: int = 400) -> np.ndarray:
    """Lawson-Hanson non-negative least squares."""
    n = a.shape[1]
    active = np.zeros(n, dtype=bool)
    x = np.zeros(n)
    resid = b - a @ x
    w = a.T @ resid
    tol = 1e-12 * max(float(np.max(np.abs(a))), 1.0) * max(float(np.max(np.abs(b))), 1.0)
    for _ in range(max_iter):
        if active.all() or float(np.max(w[~active], initial=-np.inf)) <= tol:
            break
        j = int(np.flatnonzero(~active)[np.argmax(w[~active])])
        active[j] = True
        while True:
            s = np.zeros(n)
            sol, *_ = np.linalg.lstsq(a[:, active], b, rcond=None)
            s[active] = sol
            if float(np.min(s[active], initial=1.0)) > 0.0:
                break
            mask = active & (s <= 0.0)
            denom = x[mask] - s[mask]
            alpha = float(np.min(x[mask] / np.where(denom > 0, denom, np.inf)))
            x = x + alpha * (s - x)
            active[x <= 1e-14] = False
            x[~active] = 0.0
        x = s
        w = a.T @ (b - a @ x)
    return x


def _simplex_nnls(a_mat: np.ndarray, target: np.ndarray, penalty: float = 4.0) -> np.ndarray:
    """min ||A w - t|| over the probability simplex: non-negative least
    squares with the unit-sum constraint as a heavily weighted extra row."""
    k = a_mat.shape[1]
    design = np.vstack([
        np.real(a_mat),
        np.imag(a_mat),
        penalty * np.ones((1, k)),
    ])
    rhs = np.concatenate([np.real(target), np.imag(target), [penalty]])
    w = _nnls(design, rhs)
    total = float(np.sum(w))
    if total <= 1e-12:
        return np.full(k, 1.0 / k)
    return w / total


class MaxComposite(FreeStateSet):
    """States whose every single-party marginal is locally free."""

    kind = "max-composite"
    has_linear_membership = True

    def __init__(self, locals_: Sequence[FreeStateSet], labels: Sequence[str] | None = None):
        if len(locals_) < 2:
            raise ValueError("a composite needs at least two parties")
        self.locals = list(locals_)
        labels = list(labels) if labels else [str(i + 1) for i in range(len(locals_))]
        self.structure = TensorStructure(zip(labels, [s.dim for s in locals_]))
        super().__init__(self.structure.dim)

    @property
    def local_dims(self) -> tuple[int, ...]:
        return self.structure.dims

    def contains(self, rho, tol: float = MEMBERSHIP_TOL) -> bool:
        m = _mat(rho)
        self._check_dim(m)
        dims = self.local_dims
        for i, s in enumerate(self.locals):
            if not s.contains(partial_trace_mat(m, dims, [i]), tol):
                return False
        return True

    def _marginal_projector(self, i: int):
        dims = self.local_dims
        d_rest = self.dim // dims[i]

        def proj(y):
            marg = partial_trace_mat(y, dims, [i])
            fixed = self.locals[i].marginal_projection(marg)
            return y + _lift_marginal_correction(fixed - marg, dims, i) / d_rest

        return proj

    def _projections(self):
        """Frobenius projections whose intersection is the feasible set;
        subclasses may append further convex constraints."""

        def psd(y):
            w, v = np.linalg.eigh(0.5 * (y + y.conj().T))
            return (v * np.clip(w, 0.0, None)) @ v.conj().T

        def unit_trace(y):
            d = y.shape[0]
            return y + (1.0 - np.trace(y)) / d * np.eye(d)

        return [psd, unit_trace] + [self._marginal_projector(i) for i in range(len(self.locals))]

    def project_feasible(self, x: np.ndarray, iters: int = 400, tol: float = 1e-11) -> np.ndarray:
        """Dykstra projection onto {PSD, trace 1, all marginals locally free}."""
        projections = self._projections()
        incs = [np.zeros_like(x) for _ in projections]
        cur = x.copy()
        for _ in range(iters):
            prev = cur.copy()
            for s_idx, proj_fn in enumerate(projections):
                y = cur + incs[s_idx]
                proj = proj_fn(y)
                incs[s_idx] = y - proj
                cur = proj
            if float(np.max(np.abs(cur - prev))) < tol:
                break
        return cur

    def lmo(self, grad, rng=None, iters: int = 250):
        """Linear minimization by projected subgradient over the feasible set."""
        g = as_complex(grad)
        g = 0.5 * (g + g.conj().T)
        x = self.full_rank_state()
        if x is None:
            x = self.project_feasible(np.eye(self.dim, dtype=complex) / self.dim)
        best, best_val = None, np.inf
        scale = max(float(np.max(np.abs(g))), 1e-12)
        for t in range(1, iters + 1):
            x = self.project_feasible(x - (0.9 / (scale * np.sqrt(t))) * g, iters=160)
            val = float(np.real(np.trace(g @ x)))
            if val < best_val:
                best_val, best = val, x
        return self.project_feasible(best, iters=800)

    def random_state(self, rng):
        parts = []
        for s in self.locals:
            p = s.random_state(rng)
            fr = s.full_rank_state()
            if fr is not None:
                p = 0.5 * (p + fr)
            parts.append(p)
        base = np.array([[1.0 + 0j]])
        for p in parts:
            base = np.kron(base, p)
        corr = np.zeros_like(base)
        for _ in range(3):
            term = np.array([[1.0 + 0j]])
            for d in self.local_dims:
                c = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
                c = 0.5 * (c + c.conj().T)
                c -= np.trace(c) / d * np.eye(d)
                term = np.kron(term, c)
            corr += term
        nrm = float(np.linalg.norm(corr))
        if nrm < 1e-14:
            return base
        corr /= nrm
        lo, hi = 0.0, 1.0
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            if np.linalg.eigvalsh(base + mid * corr)[0] >= 1e-10:
                lo = mid
            else:
                hi = mid
        t = lo * rng.uniform()
        return base + t * corr

    def full_rank_state(self):
        parts = [s.full_rank_state() for s in self.locals]
        if any(p is None for p in parts):
            return None
        out = np.array([[1.0 + 0j]])
        for p in parts:
            out = np.kron(out, p)
        return out

    def verification_states(self, rng, n):
        return [self.random_state(rng) for _ in range(n)], "sampled"

    def to_json(self):
        return {
            "kind": self.kind,
            "dim": self.dim,
            "labels": list(self.structure.labels),
            "locals": [s.to_json() for s in self.locals],
        }


def _lift_marginal_correction(delta, dims, i):
    """Lift a marginal-space correction to the full space: delta (x) I / 1."""
    out = np.array([[1.0 + 0j]])
    for j, d in enumerate(dims):
        out = np.kron(out, delta if j == i else np.eye(d, dtype=complex))
    return out


# ---------------------------------------------------------------------------
# theory descriptor wire format


def set_from_json(obj: dict) -> FreeStateSet:
    from .qcore import mat_from_json

    kind = obj["kind"]
    if kind == "incoherent":
        basis = mat_from_json(obj["basis"]) if "basis" in obj else None
        return Incoherent(obj["dim"], basis)
    if kind == "real":
        return RealStates(obj["dim"])
    if kind == "singleton":
        return Singleton(mat_from_json(obj["gamma"]))
    if kind == "all":
        return AllStates(obj["dim"])
    if kind == "separable":
        return SeparableTwoQubit(tuple(obj.get("cut", (2, 2))))
    if kind == "finite":
        return FiniteSet([mat_from_json(s) for s in obj["states"]])
    if kind == "min-composite":
        return MinComposite([set_from_json(s) for s in obj["locals"]], obj.get("labels"))
    if kind == "max-composite":
        return MaxComposite([set_from_json(s) for s in obj["locals"]], obj.get("labels"))
    raise ValueError(f"unknown theory kind {kind!r}")


# ---------------------------------------------------------------------------
# free-operation classes


class FreeOpClass:
    kind = "abstract"

    def contains_channel(self, channel: ch.KrausChannel, tol: float = 1e-9) -> bool:
        raise NotImplementedError

    def sample_channel(self, rng: np.random.Generator, dim: int) -> ch.KrausChannel:
        raise NotImplementedError(f"{self.kind} has no channel sampler")

    def to_json(self) -> dict:
        return {"kind": self.kind}


def _sio_normal_form(k: np.ndarray, tol: float) -> bool:
    mask = np.abs(k) > tol
    return bool(np.all(mask.sum(axis=0) <= 1) and np.all(mask.sum(axis=1) <= 1))


class Sio(FreeOpClass):
    """Strictly incoherent operations, decided on the given Kraus family:
    every operator has at most one nonzero entry per row and per column."""

    kind = "sio"

    def __init__(self, basis: np.ndarray | None = None):
        self.basis = None if basis is None else as_complex(basis)

    def _frame(self, k):
        return k if self.basis is None else self.basis.conj().T @ k @ self.basis

    def contains_channel(self, channel, tol: float = 1e-9) -> bool:
        return all(_sio_normal_form(self._frame(k), tol) for k in channel.kraus)

    def kraus_ok(self, k: np.ndarray, tol: float = 1e-9) -> bool:
        return _sio_normal_form(self._frame(np.asarray(k, dtype=complex)), tol)

    def sample_channel(self, rng, dim):
        n = int(rng.integers(1, 4))
        perms = [rng.permutation(dim) for _ in range(n)]
        cols = rng.normal(size=(n, dim)) + 1j * rng.normal(size=(n, dim))
        norms = np.sqrt(np.sum(np.abs(cols) ** 2, axis=0))
        cols = cols / norms
        ops = []
        for m in range(n):
            k = np.zeros((dim, dim), dtype=complex)
            for j in range(dim):
                k[perms[m][j], j] = cols[m, j]
            ops.append(k if self.basis is None else self.basis @ k @ self.basis.conj().T)
        return ch.KrausChannel(tuple(ops), single_party(dim), single_party(dim))


class RealOps(FreeOpClass):
    """Operations with an all-real Kraus decomposition (decided on the given one)."""

    kind = "real-ops"

    def contains_channel(self, channel, tol: float = 1e-9) -> bool:
        return all(float(np.max(np.abs(np.imag(k)))) <= tol for k in channel.kraus)

    def kraus_ok(self, k: np.ndarray, tol: float = 1e-9) -> bool:
        return float(np.max(np.abs(np.imag(np.asarray(k))))) <= tol

    def sample_channel(self, rng, dim):
        n = int(rng.integers(1, 4))
        gs = [rng.normal(size=(dim, dim)) for _ in range(n)]
        t = sum(g.T @ g for g in gs)
        w, v = np.linalg.eigh(t)
        t_inv_half = (v * (1.0 / np.sqrt(np.clip(w, 1e-14, None)))) @ v.T
        ops = tuple((g @ t_inv_half).astype(complex) for g in gs)
        return ch.KrausChannel(ops, single_party(dim), single_party(dim))


class UnitalOps(FreeOpClass):
    kind = "unital"

    def contains_channel(self, channel, tol: float = 1e-9) -> bool:
        return ch.is_unital(channel, tol)

    def sample_channel(self, rng, dim):
        n = int(rng.integers(1, 4))
        w = rng.dirichlet(np.ones(n))
        ops = tuple(np.sqrt(w[m]) * random_unitary(rng, dim) for m in range(n))
        return ch.KrausChannel(ops, single_party(dim), single_party(dim))


class AllOps(FreeOpClass):
    kind = "all-ops"

    def contains_channel(self, channel, tol: float = 1e-9) -> bool:
        return True

    def sample_channel(self, rng, dim):
        return ch.random_channel(rng, dim, dim, int(rng.integers(1, 4)))


@dataclass
class RngVerdict:
    ok: bool
    mode: str
    n_states: int
    witness: np.ndarray | None = None

    def describe(self) -> str:
        status = "verified" if self.ok else "violated"
        return f"{status} on {self.n_states} states ({self.mode})"


class Rng(FreeOpClass):
    """Resource non-generating operations with respect to a free-state set.

    Verification is certificate-based: exhaustive when the set has finitely
    many extreme points, otherwise sampled; the verdict records which.
    """

    kind = "rng"

    def __init__(self, free_set: FreeStateSet, n_samples: int = 40, seed: int = 11):
        self.free_set = free_set
        self.n_samples = n_samples
        self.seed = seed

    def verify(self, channel: ch.KrausChannel, tol: float = MEMBERSHIP_TOL) -> RngVerdict:
        rng = np.random.default_rng(self.seed)
        states, mode = self.free_set.verification_states(rng, self.n_samples)
        for mu in states:
            image = channel.apply_mat(mu)
            if not self.free_set.contains(image, tol):
                return RngVerdict(False, mode, len(states), witness=mu)
        return RngVerdict(True, mode, len(states))

    def contains_channel(self, channel, tol: float = 1e-6) -> bool:
        return self.verify(channel, tol).ok

    def to_json(self):
        return {"kind": self.kind, "set": self.free_set.to_json()}


class Lfocc(FreeOpClass):
    """Round-based protocols whose per-round local families pass each acting
    party's local operation class."""

    kind = "lfocc"

    def __init__(self, local_classes: dict[str, FreeOpClass]):
        self.local_classes = dict(local_classes)

    def protocol_ok(self, protocol: ch.LfoccProtocol, tol: float = 1e-9) -> bool:
        for party, _hist, family in protocol.local_round_families():
            cls = self.local_classes[party]
            chan = ch.KrausChannel(
                tuple(family),
                single_party(family[0].shape[0], party),
                single_party(family[0].shape[0], party),
            )
            if not cls.contains_channel(chan, tol):
                return False
        return True

    def contains_channel(self, channel, tol: float = 1e-9) -> bool:
        raise NotImplementedError("membership is decided on protocols, not on flat channels")


def op_in_class(channel: ch.KrausChannel, cls: FreeOpClass, tol: float = 1e-9) -> bool:
    """Predicate dispatch; see each class for what exactly is being decided."""
    return cls.contains_channel(channel, tol)


def random_free_state(free_set: FreeStateSet, seed: int) -> DensityOperator:
    """Seeded sample; always passes the set's own membership test."""
    rng = np.random.default_rng(seed)
    m = free_set.random_state(rng)
    structure = getattr(free_set, "structure", None) or single_party(free_set.dim)
    return DensityOperator(m, structure)


def random_lfocc_protocol(
    rng: np.random.Generator,
    structure: TensorStructure,
    classes_by_party: dict[str, FreeOpClass],
    n_rounds: int,
    order: Sequence[str] | None = None,
) -> ch.LfoccProtocol:
    """Random protocol whose round families are drawn from the local classes."""
    labels = list(order) if order else list(structure.labels)
    rounds = []
    histories = [""]
    for r in range(n_rounds):
        party = labels[r % len(labels)]
        dim = structure.local_dim(party)
        cls = classes_by_party[party]
        branches = {}
        new_histories = []
        for hist in histories:
            fam = cls.sample_channel(rng, dim).kraus
            branches[hist] = list(fam)
            for l in range(len(fam)):
                new_histories.append(f"{hist},{l}" if hist else str(l))
        rounds.append(ch.lfocc_round(structure, party, branches))
        histories = new_histories
        if len(histories) > 32:
            break
    return ch.LfoccProtocol(structure, tuple(rounds))
