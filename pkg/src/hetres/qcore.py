"""Dense complex Hermitian linear algebra on small multipartite systems.

Everything here works on explicit numpy arrays at dimensions <= 16.  States
carry a :class:`TensorStructure` naming the parties, so partial traces,
partial transposes and embeddings are always addressed by party label rather
than by axis arithmetic at the call site.  All entropic quantities are in
bits (log base 2).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
EIG_FLOOR = 1e-12
SUPPORT_TOL = 1e-10

LN2 = np.log(2.0)


def as_complex(mat) -> np.ndarray:
    m = np.asarray(mat, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


def check_hermitian(mat: np.ndarray, tol: float = HERMITICITY_TOL) -> np.ndarray:
    """Return ``mat`` as a complex array after checking M = M^dag within tol."""
    m = as_complex(mat)
    dev = float(np.max(np.abs(m - m.conj().T)))
    if dev > tol:
        raise ValueError(f"matrix is not Hermitian (deviation {dev:.3e} > {tol:.1e})")
    return m


@dataclass(frozen=True)
class TensorStructure:
    """Ordered party labels with local dimensions.

    The declaration order is canonical: axes of the underlying arrays follow
    it, and relabeling is only ever done through :func:`permute_parties`.
    """

    parties: tuple[tuple[str, int], ...]

    def __init__(self, parties: Iterable[tuple[str, int]]):
        parties = tuple((str(lbl), int(d)) for lbl, d in parties)
        labels = [lbl for lbl, _ in parties]
        if len(set(labels)) != len(labels):
            raise ValueError(f"party labels must be unique, got {labels}")
        if any(d <= 0 for _, d in parties):
            raise ValueError("party dimensions must be positive")
        object.__setattr__(self, "parties", parties)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lbl for lbl, _ in self.parties)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.parties)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def index(self, label: str) -> int:
        for i, (lbl, _) in enumerate(self.parties):
            if lbl == label:
                return i
        raise KeyError(f"unknown party label {label!r} (have {self.labels})")

    def local_dim(self, label: str) -> int:
        return self.parties[self.index(label)][1]

    def subset(self, labels: Sequence[str]) -> "TensorStructure":
        keep = set(labels)
        return TensorStructure([p for p in self.parties if p[0] in keep])

    def concat(self, other: "TensorStructure") -> "TensorStructure":
        return TensorStructure(self.parties + other.parties)


def single_party(dim: int, label: str = "0") -> TensorStructure:
    return TensorStructure([(label, dim)])


@dataclass(frozen=True)
class DensityOperator:
    """A density matrix together with its party structure.

    Construction validates Hermiticity, positivity (eigenvalues >= -1e-10)
    and unit trace.  Instances are immutable and safe to share.
    """

    mat: np.ndarray
    structure: TensorStructure
    _validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        m = check_hermitian(self.mat)
        object.__setattr__(self, "mat", 0.5 * (m + m.conj().T))
        if self.structure.dim != m.shape[0]:
            raise ValueError(
                f"structure dim {self.structure.dim} != matrix dim {m.shape[0]}"
            )
        if self._validate:
            tr = float(np.real(np.trace(self.mat)))
            if abs(tr - 1.0) > TRACE_TOL:
                raise ValueError(f"trace {tr} is not 1 within {TRACE_TOL:.1e}")
            lam = np.linalg.eigvalsh(self.mat)
            if lam[0] < -PSD_TOL:
                raise ValueError(f"negative eigenvalue {lam[0]:.3e}")

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.mat)


def density(mat, structure: TensorStructure | None = None) -> DensityOperator:
    m = as_complex(mat)
    if structure is None:
        structure = single_party(m.shape[0])
    return DensityOperator(m, structure)


def pure_state(vec, structure: TensorStructure | None = None) -> DensityOperator:
    v = np.asarray(vec, dtype=complex).reshape(-1)
    v = v / np.linalg.norm(v)
    return density(np.outer(v, v.conj()), structure)


def maximally_mixed(structure: TensorStructure) -> DensityOperator:
    d = structure.dim
    return DensityOperator(np.eye(d, dtype=complex) / d, structure)


# ---------------------------------------------------------------------------
# tensor bookkeeping


def tensor(a: DensityOperator, b: DensityOperator) -> DensityOperator:
    """Kronecker product with concatenated party structure."""
    return DensityOperator(np.kron(a.mat, b.mat), a.structure.concat(b.structure))


def tensor_all(states: Sequence[DensityOperator]) -> DensityOperator:
    out = states[0]
    for s in states[1:]:
        out = tensor(out, s)
    return out


def _as_tensor(mat: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    n = len(dims)
    return mat.reshape(tuple(dims) * 2)


def partial_trace_mat(mat: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Partial trace of a square matrix over all axes not in ``keep``."""
    n = len(dims)
    keep = sorted(keep)
    t = _as_tensor(as_complex(mat), dims)
    traced = [i for i in range(n) if i not in keep]
    for off, i in enumerate(traced):
        t = np.trace(t, axis1=i - off, axis2=i - off + n - off)
    d_keep = int(np.prod([dims[i] for i in keep])) if keep else 1
    return t.reshape(d_keep, d_keep)


def partial_trace(rho: DensityOperator, keep: Sequence[str]) -> DensityOperator:
    """Trace out every party not listed in ``keep``.

    Raises ``KeyError`` on an unknown label.  The kept parties retain their
    declaration order.
    """
    idx = sorted(rho.structure.index(lbl) for lbl in keep)
    if not idx:
        raise ValueError("must keep at least one party")
    out_mat = partial_trace_mat(rho.mat, rho.structure.dims, idx)
    out_struct = TensorStructure([rho.structure.parties[i] for i in idx])
    return DensityOperator(out_mat, out_struct)


def marginal(rho: DensityOperator, label: str) -> DensityOperator:
    return partial_trace(rho, [label])


def partial_transpose_mat(mat: np.ndarray, dims: Sequence[int], party: int) -> np.ndarray:
    n = len(dims)
    t = _as_tensor(as_complex(mat), dims)
    t = np.swapaxes(t, party, party + n)
    d = int(np.prod(dims))
    return t.reshape(d, d)


def partial_transpose(rho: DensityOperator, party: str) -> np.ndarray:
    """Transpose one party's factor; Hermitian and trace preserving, but
    possibly indefinite (that indefiniteness is the entanglement test)."""
    i = rho.structure.index(party)
    return partial_transpose_mat(rho.mat, rho.structure.dims, i)


def permutation_matrix(structure: TensorStructure, new_order: Sequence[str]) -> np.ndarray:
    """Unitary that reorders the parties of ``structure`` into ``new_order``."""
    perm = [structure.index(lbl) for lbl in new_order]
    if sorted(perm) != list(range(len(structure.parties))):
        raise ValueError("new_order must be a permutation of the party labels")
    dims = structure.dims
    d = structure.dim
    eye = np.eye(d).reshape(tuple(dims) + (d,))
    eye = np.transpose(eye, tuple(perm) + (len(dims),))
    return eye.reshape(d, d).astype(complex)


def permute_parties(rho: DensityOperator, new_order: Sequence[str]) -> DensityOperator:
    p = permutation_matrix(rho.structure, new_order)
    struct = TensorStructure([rho.structure.parties[rho.structure.index(l)] for l in new_order])
    return DensityOperator(p @ rho.mat @ p.conj().T, struct)


def embed_operator(op: np.ndarray, structure: TensorStructure, party: str) -> np.ndarray:
    """Embed a single-party operator as op (x) identity on the full space."""
    i = structure.index(party)
    dims = structure.dims
    if op.shape != (dims[i], dims[i]):
        raise ValueError(f"operator shape {op.shape} does not match party dim {dims[i]}")
    full = np.array([[1.0 + 0j]])
    for j, d in enumerate(dims):
        full = np.kron(full, op if j == i else np.eye(d))
    return full


# ---------------------------------------------------------------------------
# spectral helpers and entropies


def eig_hermitian(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition M = V diag(w) V^dag of a Hermitian matrix.

    Backed by LAPACK through numpy; the reconstruction residual is checked
    to stay below 1e-9 at the dimensions this package handles.
    """
    m = check_hermitian(mat)
    w, v = np.linalg.eigh(m)
    return w, v


def von_neumann_entropy(rho: DensityOperator | np.ndarray) -> float:
    """S(rho) = -sum lambda log2 lambda in bits, treating lambda <= 1e-12 as 0."""
    m = rho.mat if isinstance(rho, DensityOperator) else check_hermitian(rho)
    lam = np.linalg.eigvalsh(m)
    lam = lam[lam > EIG_FLOOR]
    return float(-np.sum(lam * np.log2(lam))) if lam.size else 0.0


def _matrix(x) -> np.ndarray:
    return x.mat if isinstance(x, DensityOperator) else as_complex(x)


def relative_entropy(rho, sigma) -> float:
    """Quantum relative entropy D(rho || sigma) = Tr rho (log2 rho - log2 sigma).

    Returns +inf iff the support of rho leaks outside the support of sigma
    (kernel overlap beyond 1e-10).
    """
    a = _matrix(rho)
    b = _matrix(sigma)
    if a.shape != b.shape:
        raise ValueError("dimension mismatch")
    wa, _ = eig_hermitian(a)
    wb, vb = eig_hermitian(b)
    kernel = vb[:, wb <= EIG_FLOOR]
    if kernel.shape[1]:
        overlap = float(np.real(np.trace(kernel.conj().T @ a @ kernel)))
        if overlap > SUPPORT_TOL:
            return float("inf")
    lam = wa[wa > EIG_FLOOR]
    term_rho = float(np.sum(lam * np.log2(lam))) if lam.size else 0.0
    diag_rho = np.real(np.einsum("ij,jk,ki->i", vb.conj().T, a, vb))
    logs = np.log2(np.clip(wb, EIG_FLOOR, None))
    term_cross = float(np.dot(diag_rho, logs))
    return term_rho - term_cross


def dephase(rho: DensityOperator, basis: np.ndarray | None = None) -> DensityOperator:
    """Kill all off-diagonal elements in the given orthonormal basis.

    ``basis`` is a unitary whose columns are the basis vectors; ``None``
    means the computational basis.
    """
    if basis is None:
        out = np.diag(np.diag(rho.mat))
    else:
        b = as_complex(basis)
        if float(np.max(np.abs(b.conj().T @ b - np.eye(b.shape[0])))) > HERMITICITY_TOL:
            raise ValueError("basis is not orthonormal within 1e-10")
        out = b @ np.diag(np.diag(b.conj().T @ rho.mat @ b)) @ b.conj().T
    return DensityOperator(out, rho.structure)


def trace_norm(mat: np.ndarray) -> float:
    w = np.linalg.eigvalsh(check_hermitian(mat))
    return float(np.sum(np.abs(w)))


def trace_norm_distance(a, b) -> float:
    """||a - b||_1 via an eigensolve of the difference; lies in [0, 2] for states."""
    ma, mb = _matrix(a), _matrix(b)
    if ma.shape != mb.shape:
        raise ValueError("dimension mismatch")
    return trace_norm(ma - mb)


def fidelity_with_pure(rho: DensityOperator, vec: np.ndarray) -> float:
    v = np.asarray(vec, dtype=complex).reshape(-1)
    v = v / np.linalg.norm(v)
    return float(np.real(v.conj() @ rho.mat @ v))


# ---------------------------------------------------------------------------
# common states and gates

KET0 = np.array([1.0, 0.0], dtype=complex)
KET1 = np.array([0.0, 1.0], dtype=complex)
KET_PLUS = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0)
KET_MINUS = np.array([1.0, -1.0], dtype=complex) / np.sqrt(2.0)
KET_PLUS_Y = np.array([1.0, 1.0j], dtype=complex) / np.sqrt(2.0)

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2.0)
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)


def bell_phi_plus_vec(d: int = 2) -> np.ndarray:
    v = np.zeros(d * d, dtype=complex)
    for i in range(d):
        v[i * d + i] = 1.0
    return v / np.sqrt(d)


def rotation_z(theta: float) -> np.ndarray:
    return np.diag([1.0, np.exp(1j * theta)]).astype(complex)


# ---------------------------------------------------------------------------
# random sampling (all generators passed explicitly for reproducibility)


def random_pure_vec(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_density_mat(rng: np.random.Generator, dim: int, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    m = g @ g.conj().T
    return m / np.real(np.trace(m))


def random_hermitian(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (g + g.conj().T)


def random_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(g)
    return q @ np.diag(np.diag(r) / np.abs(np.diag(r)))


# ---------------------------------------------------------------------------
# the matrix literal wire format {dim, re, im}, shared by every higher module


def mat_to_json(mat: np.ndarray) -> dict:
    m = np.asarray(mat, dtype=complex)
    out = {
        "re": [float(x) for x in np.real(m).reshape(-1)],
        "im": [float(x) for x in np.imag(m).reshape(-1)],
    }
    if m.shape[0] == m.shape[1]:
        out["dim"] = int(m.shape[0])
    else:
        out["rows"], out["cols"] = int(m.shape[0]), int(m.shape[1])
    return out


def mat_from_json(obj: dict) -> np.ndarray:
    if "dim" in obj:
        rows = cols = int(obj["dim"])
    else:
        rows, cols = int(obj["rows"]), int(obj["cols"])
    re = np.asarray(obj["re"], dtype=float).reshape(rows, cols)
    im = np.asarray(obj["im"], dtype=float).reshape(rows, cols)
    return re + 1j * im


def mat_to_json_str(mat: np.ndarray) -> str:
    return json.dumps(mat_to_json(mat))
