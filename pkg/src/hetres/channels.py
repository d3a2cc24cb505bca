"""Quantum channels as Kraus families, plus round-based local protocols.

Channels are stored as explicit Kraus operators (dim_out x dim_in); the Choi
matrix is computed on demand when a map needs re-factoring.  Local protocols
with classical communication are stored as per-round Kraus trees keyed by the
classical history so far, and compiled into a flat Kraus family.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .qcore import (
    DensityOperator,
    TensorStructure,
    as_complex,
    check_hermitian,
    embed_operator,
    mat_from_json,
    mat_to_json,
    maximally_mixed,
    partial_trace_mat,
    permutation_matrix,
    single_party,
    trace_norm,
)

TP_TOL = 1e-9
LOCALITY_TOL = 1e-10
BRANCH_CAP = 64


@dataclass(frozen=True)
class KrausChannel:
    """A CPTP map given by a nonempty Kraus family.

    Trace preservation (sum K^dag K = I within 1e-9) is validated on
    construction; set ``check_tp=False`` only for maps known exact by
    construction where the check is redundant.
    """

    kraus: tuple[np.ndarray, ...]
    in_structure: TensorStructure
    out_structure: TensorStructure
    check_tp: bool = field(default=True, repr=False)

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.kraus)
        if not ops:
            raise ValueError("Kraus family must be nonempty")
        d_in, d_out = self.in_structure.dim, self.out_structure.dim
        for k in ops:
            if k.shape != (d_out, d_in):
                raise ValueError(f"Kraus shape {k.shape} != ({d_out}, {d_in})")
        object.__setattr__(self, "kraus", ops)
        if self.check_tp:
            acc = sum(k.conj().T @ k for k in ops)
            dev = float(np.max(np.abs(acc - np.eye(d_in))))
            if dev > TP_TOL:
                raise ValueError(f"channel is not trace preserving (dev {dev:.3e})")

    @property
    def dim_in(self) -> int:
        return self.in_structure.dim

    @property
    def dim_out(self) -> int:
        return self.out_structure.dim

    def apply_mat(self, mat: np.ndarray) -> np.ndarray:
        m = as_complex(mat)
        if m.shape[0] != self.dim_in:
            raise ValueError(f"dimension mismatch: state {m.shape[0]}, channel {self.dim_in}")
        out = np.zeros((self.dim_out, self.dim_out), dtype=complex)
        for k in self.kraus:
            out += k @ m @ k.conj().T
        return out

    def to_json(self) -> dict:
        return {
            "in_dims": list(self.in_structure.dims),
            "out_dims": list(self.out_structure.dims),
            "in_labels": list(self.in_structure.labels),
            "out_labels": list(self.out_structure.labels),
            "kraus": [mat_to_json(k) for k in self.kraus],
        }


def channel_from_json(obj: dict) -> KrausChannel:
    in_labels = obj.get("in_labels") or [f"p{i}" for i in range(len(obj["in_dims"]))]
    out_labels = obj.get("out_labels") or [f"p{i}" for i in range(len(obj["out_dims"]))]
    ins = TensorStructure(zip(in_labels, obj["in_dims"]))
    outs = TensorStructure(zip(out_labels, obj["out_dims"]))
    kraus = [mat_from_json(k) for k in obj["kraus"]]
    return KrausChannel(tuple(kraus), ins, outs)


def apply(channel: KrausChannel, rho: DensityOperator) -> DensityOperator:
    """Apply the channel, returning a validated state on the output structure."""
    return DensityOperator(channel.apply_mat(rho.mat), channel.out_structure)


def compose(second: KrausChannel, first: KrausChannel) -> KrausChannel:
    """Concatenation second o first as the Kraus family {K2 K1}."""
    if first.dim_out != second.dim_in:
        raise ValueError("dimension mismatch in composition")
    ops = tuple(k2 @ k1 for k2 in second.kraus for k1 in first.kraus)
    return KrausChannel(ops, first.in_structure, second.out_structure)


def identity_channel(structure: TensorStructure) -> KrausChannel:
    return KrausChannel((np.eye(structure.dim, dtype=complex),), structure, structure)


def unitary_channel(
    u: np.ndarray,
    in_structure: TensorStructure,
    out_structure: TensorStructure | None = None,
) -> KrausChannel:
    return KrausChannel(
        (as_complex(u),), in_structure, out_structure or in_structure
    )


def relabel(channel: KrausChannel, labels: Sequence[str]) -> KrausChannel:
    """Rename parties (same names on both sides) without touching the map."""
    ins = TensorStructure(zip(labels, channel.in_structure.dims))
    outs = TensorStructure(zip(labels, channel.out_structure.dims))
    return KrausChannel(channel.kraus, ins, outs, check_tp=False)


def product_channel(parts: Sequence[KrausChannel], labels: Sequence[str] | None = None) -> KrausChannel:
    """Tensor product of per-party channels, relabeled to stay collision free."""
    labels = [str(i + 1) for i in range(len(parts))] if labels is None else list(labels)
    renamed = []
    for lbl, part in zip(labels, parts):
        if len(part.in_structure.parties) == 1:
            renamed.append(relabel(part, [lbl]))
        else:
            renamed.append(relabel(part, [f"{lbl}.{sub}" for sub in part.in_structure.labels]))
    out = renamed[0]
    for part in renamed[1:]:
        out = channel_tensor(out, part)
    return out


def channel_tensor(a: KrausChannel, b: KrausChannel) -> KrausChannel:
    ops = tuple(np.kron(ka, kb) for ka in a.kraus for kb in b.kraus)
    return KrausChannel(
        ops,
        a.in_structure.concat(b.in_structure),
        a.out_structure.concat(b.out_structure),
    )


def prepare_channel(
    state: DensityOperator, in_structure: TensorStructure
) -> KrausChannel:
    """The constant map X -> Tr(X) * state."""
    w, v = np.linalg.eigh(state.mat)
    ops = []
    for a in range(len(w)):
        if w[a] <= 1e-14:
            continue
        for b in range(in_structure.dim):
            k = np.sqrt(w[a]) * np.outer(v[:, a], np.eye(in_structure.dim)[b])
            ops.append(k)
    return KrausChannel(tuple(ops), in_structure, state.structure)


def measure_prepare_channel(
    povm: Sequence[np.ndarray],
    outputs: Sequence[DensityOperator],
    in_structure: TensorStructure,
) -> KrausChannel:
    """Measure a POVM and prepare the matching output state."""
    if len(povm) != len(outputs):
        raise ValueError("one output state per POVM element")
    out_structure = outputs[0].structure
    ops = []
    for elem, out in zip(povm, outputs):
        ew, ev = np.linalg.eigh(check_hermitian(elem))
        ow, ov = np.linalg.eigh(out.mat)
        for b in range(len(ew)):
            if ew[b] <= 1e-14:
                continue
            for a in range(len(ow)):
                if ow[a] <= 1e-14:
                    continue
                ops.append(np.sqrt(ow[a] * ew[b]) * np.outer(ov[:, a], ev[:, b].conj()))
    return KrausChannel(tuple(ops), in_structure, out_structure)


def is_unital(channel: KrausChannel, tol: float = 1e-9) -> bool:
    """True iff the channel fixes the maximally mixed state within tol (trace norm)."""
    if channel.dim_in != channel.dim_out:
        raise ValueError("unitality needs a square channel")
    d = channel.dim_in
    image = channel.apply_mat(np.eye(d, dtype=complex) / d)
    return trace_norm(image - np.eye(d) / d) <= tol


# ---------------------------------------------------------------------------
# Choi form and marginal channels


def choi_matrix(channel: KrausChannel) -> np.ndarray:
    """Choi matrix sum_ij |i><j| (x) L(|i><j|), shape (d_in*d_out)^2."""
    d_in, d_out = channel.dim_in, channel.dim_out
    c = np.zeros((d_in * d_out, d_in * d_out), dtype=complex)
    for k in channel.kraus:
        v = k.T.reshape(-1)
        c += np.outer(v, v.conj())
    return c


def kraus_from_choi(choi: np.ndarray, d_in: int, d_out: int, tol: float = 1e-12) -> list[np.ndarray]:
    w, v = np.linalg.eigh(check_hermitian(choi, tol=1e-8))
    ops = []
    for lam, vec in zip(w, v.T):
        if lam <= tol:
            continue
        ops.append(np.sqrt(lam) * vec.reshape(d_in, d_out).T)
    return ops


def marginal_channel(
    channel: KrausChannel,
    target: str,
    frozen_inputs: Mapping[str, DensityOperator],
    method: str = "direct",
) -> KrausChannel:
    """Effective local channel at ``target`` with every other input frozen:
    X -> Tr_other[ L(X (x) frozen) ].  ``frozen_inputs`` must cover every
    in-party except the target.

    The default realization sandwiches each Kraus operator between the
    frozen inputs' square roots and the traced-out output basis, which keeps
    structural features of the original operators (products of local
    operators stay products, so representation-dependent predicates remain
    testable).  ``method="choi"`` instead re-factorizes through the Choi
    matrix, giving a minimal Kraus family with arbitrary mixing.
    """
    ins = channel.in_structure
    missing = [lbl for lbl in ins.labels if lbl != target and lbl not in frozen_inputs]
    if missing:
        raise ValueError(f"missing frozen input for parties {missing}")
    d_t = ins.local_dim(target)
    outs = channel.out_structure
    d_out_t = outs.local_dim(target)

    if method == "choi":
        choi = _marginal_choi(channel, target, frozen_inputs, d_t)
        ops = kraus_from_choi(choi, d_t, choi.shape[0] // d_t)
        return KrausChannel(
            tuple(ops), single_party(d_t, target), single_party(choi.shape[0] // d_t, target)
        )
    if method != "direct":
        raise ValueError("method must be 'direct' or 'choi'")

    # injection V: H_target -> H_full with sqrt(frozen) on the other slots
    inject = np.array([[1.0 + 0j]])
    for lbl, dim in ins.parties:
        if lbl == target:
            block = np.eye(dim, dtype=complex)
        else:
            fm = frozen_inputs[lbl].mat
            w, v = np.linalg.eigh(fm)
            block = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
        inject = np.kron(inject, block)
    t_out = outs.index(target)
    other_out = [i for i in range(len(outs.parties)) if i != t_out]
    d_other = int(np.prod([outs.dims[i] for i in other_out])) if other_out else 1

    injections = _slot_injections(ins, target)
    ops = []
    for k in channel.kraus:
        big = k @ inject  # full-in -> full-out with sqrt(frozen) absorbed
        t = big.reshape(tuple(outs.dims) + tuple(ins.dims))
        n_out = len(outs.dims)
        for m in range(d_other):
            sel = np.unravel_index(m, tuple(outs.dims[i] for i in other_out)) if other_out else ()
            idx: list = [slice(None)] * (n_out + len(ins.dims))
            for pos, i_out in enumerate(other_out):
                idx[i_out] = sel[pos]
            sub = t[tuple(idx)].reshape(d_out_t, channel.dim_in)
            for emb in injections:
                op = sub @ emb
                if float(np.max(np.abs(op))) > 1e-12:
                    ops.append(op)
    if not ops:
        ops = [np.zeros((d_out_t, d_t), dtype=complex)]
    return KrausChannel(
        tuple(ops), single_party(d_t, target), single_party(d_out_t, target)
    )


def _slot_injections(ins: TensorStructure, target: str) -> list[np.ndarray]:
    """Isometries H_target -> H_full placing a basis state on every slot
    except the target; X (x) I_other = sum_b emb_b X emb_b^dag."""
    other = [(lbl, dim) for lbl, dim in ins.parties if lbl != target]
    other_dims = tuple(d for _, d in other)
    d_t = ins.local_dim(target)
    out = []
    for b in range(int(np.prod(other_dims)) if other_dims else 1):
        sel = np.unravel_index(b, other_dims) if other_dims else ()
        emb = np.array([[1.0 + 0j]])
        pos = 0
        for lbl, dim in ins.parties:
            if lbl == target:
                emb = np.kron(emb, np.eye(dim, dtype=complex))
            else:
                e = np.zeros((dim, 1), dtype=complex)
                e[sel[pos], 0] = 1.0
                emb = np.kron(emb, e)
                pos += 1
        out.append(emb)
    return out


def _marginal_choi(channel, target, frozen_inputs, d_t):
    ins = channel.in_structure
    out_keep = [channel.out_structure.index(target)]
    effective = {}
    for i in range(d_t):
        for j in range(d_t):
            unit = np.zeros((d_t, d_t), dtype=complex)
            unit[i, j] = 1.0
            full = np.array([[1.0 + 0j]])
            for lbl, _ in ins.parties:
                block = unit if lbl == target else frozen_inputs[lbl].mat
                full = np.kron(full, block)
            img = channel.apply_mat(full)
            effective[(i, j)] = partial_trace_mat(img, channel.out_structure.dims, out_keep)
    d_out = effective[(0, 0)].shape[0]
    choi = np.zeros((d_t * d_out, d_t * d_out), dtype=complex)
    for i in range(d_t):
        for j in range(d_t):
            choi[i * d_out : (i + 1) * d_out, j * d_out : (j + 1) * d_out] = effective[(i, j)]
    return choi


def marginal_channel_choi(channel: KrausChannel, target: str) -> KrausChannel:
    """Diagnostic variant: freeze every other input at maximally mixed."""
    frozen = {
        lbl: maximally_mixed(TensorStructure([(lbl, d)]))
        for lbl, d in channel.in_structure.parties
        if lbl != target
    }
    return marginal_channel(channel, target, frozen)


# ---------------------------------------------------------------------------
# POVMs


@dataclass(frozen=True)
class Povm:
    elements: tuple[np.ndarray, ...]

    def __post_init__(self):
        elems = tuple(check_hermitian(e) for e in self.elements)
        d = elems[0].shape[0]
        acc = np.zeros((d, d), dtype=complex)
        for e in elems:
            if np.linalg.eigvalsh(e)[0] < -1e-10:
                raise ValueError("POVM element is not PSD within 1e-10")
            acc += e
        if float(np.max(np.abs(acc - np.eye(d)))) > 1e-9:
            raise ValueError("POVM elements do not sum to the identity within 1e-9")
        object.__setattr__(self, "elements", elems)


def binary_povm(element: np.ndarray) -> Povm:
    e = check_hermitian(element)
    return Povm((e, np.eye(e.shape[0]) - e))


# ---------------------------------------------------------------------------
# local protocols with classical communication


def local_part(op: np.ndarray, structure: TensorStructure, party: str):
    """Split op = local (x) identity-elsewhere; returns (local, deviation)."""
    labels = list(structure.labels)
    order = [party] + [l for l in labels if l != party]
    perm = permutation_matrix(structure, order)
    moved = perm @ as_complex(op) @ perm.conj().T
    d_p = structure.local_dim(party)
    d_rest = structure.dim // d_p
    loc = partial_trace_mat(moved, (d_p, d_rest), [0]) / d_rest
    recon = np.kron(loc, np.eye(d_rest))
    dev = float(np.max(np.abs(moved - recon)))
    return loc, dev


@dataclass(frozen=True)
class LfoccRound:
    """One communication round: who acts, and the Kraus family per history.

    ``branches`` maps a classical history string (comma separated branch
    indices of all earlier rounds, "" for the first round) to the Kraus
    family applied on that branch.  Operators are given on the full space
    and must act nontrivially only on ``party``.
    """

    party: str
    branches: Mapping[str, tuple[np.ndarray, ...]]


@dataclass(frozen=True)
class LfoccProtocol:
    structure: TensorStructure
    rounds: tuple[LfoccRound, ...]

    def __post_init__(self):
        d = self.structure.dim
        for rnd in self.rounds:
            self.structure.index(rnd.party)
            for hist, family in rnd.branches.items():
                acc = np.zeros((d, d), dtype=complex)
                for k in family:
                    k = as_complex(k)
                    if k.shape != (d, d):
                        raise ValueError("round operators must act on the full space")
                    _, dev = local_part(k, self.structure, rnd.party)
                    if dev > LOCALITY_TOL:
                        raise ValueError(
                            f"round operator on history {hist!r} acts outside "
                            f"party {rnd.party} (deviation {dev:.3e})"
                        )
                    acc += k.conj().T @ k
                if float(np.max(np.abs(acc - np.eye(d)))) > TP_TOL:
                    raise ValueError(f"branch family at history {hist!r} is not trace preserving")

    def local_round_families(self) -> list[tuple[str, str, list[np.ndarray]]]:
        """(party, history, local Kraus family) for every branch of every round."""
        out = []
        for rnd in self.rounds:
            for hist, family in rnd.branches.items():
                loc = [local_part(k, self.structure, rnd.party)[0] for k in family]
                out.append((rnd.party, hist, loc))
        return out


def lfocc_round(
    structure: TensorStructure,
    party: str,
    local_branches: Mapping[str, Sequence[np.ndarray]],
) -> LfoccRound:
    """Build a round from local Kraus operators, embedding identities elsewhere."""
    branches = {
        hist: tuple(embed_operator(np.asarray(k, dtype=complex), structure, party) for k in fam)
        for hist, fam in local_branches.items()
    }
    return LfoccRound(party, branches)


def protocol_to_json(protocol: LfoccProtocol) -> dict:
    return {
        "dims": list(protocol.structure.dims),
        "labels": list(protocol.structure.labels),
        "rounds": [
            {
                "party": rnd.party,
                "branches": {hist: [mat_to_json(k) for k in fam] for hist, fam in rnd.branches.items()},
            }
            for rnd in protocol.rounds
        ],
    }


def protocol_from_json(obj: dict) -> LfoccProtocol:
    structure = TensorStructure(zip(obj["labels"], obj["dims"]))
    rounds = tuple(
        LfoccRound(
            rnd["party"],
            {hist: tuple(mat_from_json(k) for k in fam) for hist, fam in rnd["branches"].items()},
        )
        for rnd in obj["rounds"]
    )
    return LfoccProtocol(structure, rounds)


def compile_lfocc(protocol: LfoccProtocol) -> KrausChannel:
    """Flatten the history tree into a single Kraus family.

    The operator for a complete history is the ordered product of the chosen
    branch operators.  Errors out beyond 64 branches or when a round lacks
    the history produced by earlier rounds.
    """
    d = protocol.structure.dim
    frontier: list[tuple[str, np.ndarray]] = [("", np.eye(d, dtype=complex))]
    for rnd in protocol.rounds:
        new_frontier = []
        for hist, op in frontier:
            if hist not in rnd.branches:
                raise ValueError(f"round for party {rnd.party} has no branch for history {hist!r}")
            family = rnd.branches[hist]
            for l, k in enumerate(family):
                new_hist = f"{hist},{l}" if hist else str(l)
                new_frontier.append((new_hist, k @ op))
            if len(new_frontier) > BRANCH_CAP:
                raise ValueError(f"protocol exceeds the {BRANCH_CAP}-branch cap")
        frontier = new_frontier
    ops = tuple(op for _, op in frontier)
    chan = KrausChannel(ops, protocol.structure, protocol.structure, check_tp=False)
    acc = sum(k.conj().T @ k for k in ops)
    if float(np.max(np.abs(acc - np.eye(d)))) > 1e-8:
        raise ValueError("compiled protocol is not trace preserving within 1e-8")
    return chan


def effective_povm(
    channel: KrausChannel,
    element: np.ndarray,
    measured_party: str,
    frozen: Mapping[str, DensityOperator] | None = None,
) -> np.ndarray:
    """Pull a measurement on one output party back through the channel.

    Computes sum_K K^dag (P embedded at the measured party) K on the input
    space, then contracts every input party other than the certified one
    with a frozen state (maximally mixed by default).  The result is a valid
    POVM element: 0 <= result <= identity.
    """
    p = check_hermitian(element)
    d_m = channel.out_structure.local_dim(measured_party)
    if p.shape != (d_m, d_m):
        raise ValueError("element must act on the measured party")
    lam = np.linalg.eigvalsh(p)
    if lam[0] < -1e-10 or lam[-1] > 1 + 1e-10:
        raise ValueError("element must satisfy 0 <= P <= identity")

    full_p = embed_operator(p, channel.out_structure, measured_party)
    pulled = np.zeros((channel.dim_in, channel.dim_in), dtype=complex)
    for k in channel.kraus:
        pulled += k.conj().T @ full_p @ k

    ins = channel.in_structure
    if len(ins.parties) == 1:
        return pulled
    frozen = dict(frozen or {})
    other = [lbl for lbl in ins.labels if lbl != measured_party]
    weights = np.array([[1.0 + 0j]])
    for lbl, dim in ins.parties:
        if lbl == measured_party:
            w = frozen[lbl].mat if lbl in frozen else np.eye(dim) / dim
        else:
            w = np.eye(dim, dtype=complex)
        weights = np.kron(weights, w)
    keep = [ins.index(lbl) for lbl in other]
    return partial_trace_mat(weights @ pulled, ins.dims, keep)


# ---------------------------------------------------------------------------
# random channels for property tests


def random_channel(
    rng: np.random.Generator, d_in: int, d_out: int, n_kraus: int = 2
) -> KrausChannel:
    g = rng.normal(size=(n_kraus * d_out, d_in)) + 1j * rng.normal(size=(n_kraus * d_out, d_in))
    q, _ = np.linalg.qr(g)
    ops = tuple(q[m * d_out : (m + 1) * d_out, :] for m in range(n_kraus))
    return KrausChannel(ops, single_party(d_in), single_party(d_out))
