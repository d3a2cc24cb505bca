"""Resource certification, local and remote.

Remote certification sends the suspect state through a preprocessing channel
and lets the other party measure; performance is the best type-II exponent
at a type-I budget.  Because the budget constraint is a supremum of a linear
functional over a convex set, it is evaluated on the images of the set's
extreme points, and the remote problem becomes a hypothesis test against
that finite image family.  Every report carries the data-processing ceiling
alongside the achieved value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import channels as ch
from .divergences import DivergenceResult, hypothesis_testing
from .qcore import (
    DensityOperator,
    TensorStructure,
    as_complex,
    mat_to_json,
    partial_trace_mat,
)
from .theories import (
    FiniteSet,
    FreeOpClass,
    FreeStateSet,
    Lfocc,
    RealOps,
    Sio,
)


def standard_certification(
    rho, free_set: FreeStateSet, epsilon: float, tol: float = 1e-6, seed: int = 0
) -> DivergenceResult:
    """Single-party certification; exactly the hypothesis-testing divergence."""
    return hypothesis_testing(rho, free_set, epsilon, tol=tol, seed=seed)


@dataclass
class CertReport:
    value: float
    ceiling: DivergenceResult
    achiever: dict
    alpha: float
    beta: float
    floor: float
    extras: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        achiever = dict(self.achiever)
        if isinstance(achiever.get("povm_element"), np.ndarray):
            achiever["povm_element"] = mat_to_json(achiever["povm_element"])
        return {
            "value": self.value,
            "ceiling": self.ceiling.to_json(),
            "achiever": achiever,
            "alpha": self.alpha,
            "beta": self.beta,
            "floor": self.floor,
            "extras": {k: v for k, v in self.extras.items() if not isinstance(v, np.ndarray)},
        }


def _restrict_name(measurements) -> str | None:
    if measurements in (None, "all"):
        return None
    if measurements == "real" or isinstance(measurements, RealOps):
        return "real"
    if measurements == "diagonal" or isinstance(measurements, Sio):
        return "diagonal"
    raise ValueError(f"unsupported measurement restriction {measurements!r}")


def _preprocess_image(lam: ch.KrausChannel, x: np.ndarray, aux) -> np.ndarray:
    """Image of a suspect-party state under preprocessing, on the measured
    space: single-party channels send the state straight through, joint
    channels absorb a fixed auxiliary on the remaining input parties and
    trace the suspect party's output away."""
    if len(lam.in_structure.parties) == 1:
        return lam.apply_mat(x)
    joint = x
    for lbl, dim in lam.in_structure.parties[1:]:
        block = aux[lbl].mat if aux and lbl in aux else np.eye(dim, dtype=complex) / dim
        joint = np.kron(joint, block)
    out = lam.apply_mat(joint)
    keep = list(range(1, len(lam.out_structure.parties)))
    return partial_trace_mat(out, lam.out_structure.dims, keep)


def remote_certification(
    rho_a,
    set_a: FreeStateSet,
    b_measurements,
    preprocessing_family: list[ch.KrausChannel],
    epsilon: float,
    tol: float = 1e-6,
    seed: int = 0,
    n_image_samples: int = 24,
    aux: dict | None = None,
) -> CertReport:
    """Best certification exponent over a family of preprocessing channels.

    Each channel maps the suspect party into the measuring party's space,
    either directly or as a joint operation whose other input slots are
    frozen at ``aux`` (maximally mixed by default); the type-I budget is
    enforced on the images of the free set's extreme (or sampled) states,
    and the measurement is optimized within the measuring party's class
    ("all", "real", or "diagonal").
    """
    if not preprocessing_family:
        raise ValueError("preprocessing family must be nonempty")
    if not (0.0 < epsilon < 1.0):
        raise ValueError("epsilon must lie strictly between 0 and 1")
    m = rho_a.mat if isinstance(rho_a, DensityOperator) else as_complex(rho_a)
    restrict = _restrict_name(b_measurements)
    rng = np.random.default_rng(seed)
    ceiling = hypothesis_testing(m, set_a, epsilon, tol=tol, seed=seed)
    floor = -math.log2(1.0 - epsilon)

    free_states, mode = set_a.verification_states(rng, n_image_samples)
    best = None
    for idx, lam in enumerate(preprocessing_family):
        if lam.in_structure.parties[0][1] != m.shape[0]:
            raise ValueError("preprocessing channel does not accept the suspect state")
        image_rho = _preprocess_image(lam, m, aux)
        image_free = FiniteSet([_preprocess_image(lam, s, aux) for s in free_states])
        res = hypothesis_testing(
            image_rho, image_free, epsilon, tol=tol, seed=seed, restrict=restrict
        )
        if best is None or res.value > best[1].value:
            best = (idx, res)
    idx, res = best
    alpha = float(res.extras.get("alpha", float("nan")))
    beta = float(res.extras.get("beta", 0.0 if math.isinf(res.value) else 2.0**-res.value))
    return CertReport(
        value=res.value,
        ceiling=ceiling,
        achiever={"channel_index": idx, "povm_element": res.optimizer},
        alpha=alpha,
        beta=beta,
        floor=floor,
        extras={"constraint_mode": mode, "restrict": restrict, "epsilon": epsilon},
    )


def lfocc_ceiling(
    rho_a,
    set_a: FreeStateSet,
    protocol: ch.LfoccProtocol,
    element: np.ndarray,
    epsilon: float,
    local_classes: dict[str, FreeOpClass] | None = None,
    measured_party: str = "B",
    diag_tol: float = 1e-10,
    seed: int = 0,
) -> CertReport:
    """Certification through a local protocol, against its structural ceiling.

    Verifies the per-round classes (suspect party strictly incoherent, the
    measuring party real by default), compiles the protocol, pulls the
    measurement back to an effective element on the suspect party, asserts
    its diagonality, and reports alpha/beta through it alongside the
    diagonal-restricted hypothesis-testing ceiling.
    """
    labels = list(protocol.structure.labels)
    a_party = next(lbl for lbl in labels if lbl != measured_party)
    classes = local_classes or {a_party: Sio(), measured_party: RealOps()}
    checker = Lfocc(classes)
    if not checker.protocol_ok(protocol):
        raise ValueError("protocol violates the declared local operation classes")

    compiled = ch.compile_lfocc(protocol)
    effective = ch.effective_povm(compiled, element, measured_party)
    off = effective - np.diag(np.diag(effective))
    off_norm = float(np.max(np.abs(off)))
    if off_norm > diag_tol:
        raise AssertionError(
            f"effective element is not diagonal (off-diagonal {off_norm:.3e})"
        )

    m = rho_a.mat if isinstance(rho_a, DensityOperator) else as_complex(rho_a)
    rng = np.random.default_rng(seed)
    worst = set_a.lmo(-effective, rng)
    alpha = float(np.real(np.trace(worst @ effective)))
    scaled = effective if alpha <= epsilon else effective * (epsilon / alpha)
    alpha_used = min(alpha, epsilon)
    beta = 1.0 - float(np.real(np.trace(m @ scaled)))
    value = float("inf") if beta <= 1e-12 else -math.log2(max(beta, 1e-300))
    ceiling = hypothesis_testing(m, set_a, epsilon, seed=seed, restrict="diagonal")
    return CertReport(
        value=value,
        ceiling=ceiling,
        achiever={"channel_index": 0, "povm_element": scaled},
        alpha=alpha_used,
        beta=beta,
        floor=-math.log2(1.0 - epsilon),
        extras={"effective_offdiag": off_norm, "raw_alpha": alpha, "epsilon": epsilon},
    )


def measure_and_forward_protocol(
    p_diag: np.ndarray, b_dim: int = 2
) -> ch.LfoccProtocol:
    """Two-round protocol realizing a diagonal binary test remotely: the
    suspect party measures {diag(p), 1 - diag(p)} (strictly incoherent),
    the other party records the announced outcome in its basis, and the
    final measurement reads that flag.  The effective element pulled back
    to the suspect party is exactly diag(p)."""
    p = np.clip(np.real(np.diag(as_complex(p_diag))), 0.0, 1.0)
    d = len(p)
    structure = TensorStructure([("A", d), ("B", b_dim)])
    k_yes = np.diag(np.sqrt(p)).astype(complex)
    k_no = np.diag(np.sqrt(1.0 - p)).astype(complex)
    round1 = ch.lfocc_round(structure, "A", {"": [k_yes, k_no]})
    flag_up = [np.outer(np.eye(b_dim)[1], np.eye(b_dim)[j]) for j in range(b_dim)]
    flag_down = [np.outer(np.eye(b_dim)[0], np.eye(b_dim)[j]) for j in range(b_dim)]
    round2 = ch.lfocc_round(structure, "B", {"0": flag_up, "1": flag_down})
    return ch.LfoccProtocol(structure, (round1, round2))


def move_and_replace_channel(mu_a: np.ndarray, dim: int) -> ch.KrausChannel:
    """Swap the suspect system to the measuring party and refill with mu_a.

    Kraus operators sqrt(lam_a) (|phi_a> (x) I) (I (x) <j|) move the A input
    into the B slot while preparing mu_a on A.
    """
    w, v = np.linalg.eigh(as_complex(mu_a))
    ops = []
    eye = np.eye(dim, dtype=complex)
    for a in range(dim):
        if w[a] <= 1e-14:
            continue
        left = np.kron(v[:, a].reshape(-1, 1), eye)
        for j in range(dim):
            right = np.kron(eye, eye[j].reshape(1, -1))
            ops.append(np.sqrt(w[a]) * (left @ right))
    structure = TensorStructure([("A", dim), ("B", dim)])
    return ch.KrausChannel(tuple(ops), structure, structure)


def rng_optimal_protocol(
    rho_a,
    set_a: FreeStateSet,
    set_b: FreeStateSet,
    mu_a,
    epsilon: float,
    tol: float = 1e-6,
    seed: int = 0,
    n_inclusion_samples: int = 24,
) -> tuple[ch.KrausChannel, CertReport]:
    """The move-and-replace strategy that saturates the certification ceiling.

    Valid when the suspect party's free states are free for the measuring
    party under the dimension identification (checked on samples) and the
    refill state is free; then the remote value equals the unrestricted
    hypothesis-testing divergence, which the report certifies within solver
    gaps.
    """
    if set_a.dim != set_b.dim:
        raise ValueError("the construction identifies the two local spaces; dims must match")
    m = rho_a.mat if isinstance(rho_a, DensityOperator) else as_complex(rho_a)
    mu = mu_a.mat if isinstance(mu_a, DensityOperator) else as_complex(mu_a)
    rng = np.random.default_rng(seed)
    probes, _ = set_a.verification_states(rng, n_inclusion_samples)
    for s in probes:
        if not set_b.contains(s, 1e-8):
            raise ValueError("inclusion check failed: a free state of the suspect party "
                             "is not free for the measuring party")
    if not set_a.contains(mu, 1e-8):
        raise ValueError("the refill state must be free for the suspect party")

    channel = move_and_replace_channel(mu, set_a.dim)
    ceiling = hypothesis_testing(m, set_a, epsilon, tol=tol, seed=seed)

    # Evaluate the strategy end to end: measure the ceiling's optimal element
    # on B after the move; alpha and beta must reproduce the ceiling.
    p_opt = ceiling.optimizer if ceiling.optimizer is not None else epsilon * np.eye(set_a.dim)
    aux = np.eye(set_b.dim, dtype=complex) / set_b.dim
    image_rho = channel.apply_mat(np.kron(m, aux))
    marg_rho = partial_trace_mat(image_rho, (set_a.dim, set_b.dim), [1])
    beta = 1.0 - float(np.real(np.trace(marg_rho @ p_opt)))
    alpha = -np.inf
    for s in probes:
        img = channel.apply_mat(np.kron(s, aux))
        marg = partial_trace_mat(img, (set_a.dim, set_b.dim), [1])
        alpha = max(alpha, float(np.real(np.trace(marg @ p_opt))))
    value = float("inf") if beta <= 1e-12 else -math.log2(max(beta, 1e-300))
    achieved_matches = (
        (math.isinf(value) and math.isinf(ceiling.value))
        or abs(value - ceiling.value) <= max(ceiling.gap, 1e-6) + 1e-9
    )
    report = CertReport(
        value=value,
        ceiling=ceiling,
        achiever={"channel_index": 0, "povm_element": p_opt},
        alpha=alpha,
        beta=beta,
        floor=-math.log2(1.0 - epsilon),
        extras={"saturates_ceiling": achieved_matches, "epsilon": epsilon},
    )
    return channel, report
