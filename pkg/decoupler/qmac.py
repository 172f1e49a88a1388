"""One-shot coding for the two-sender quantum multiple access channel.

Control states, the δ₁–δ₄ error ledger, the achievable rate regions and the
Uhlmann decoder. Pure states ψ and φ for the messages list the message system
first and the reference last; anything in between is side information held by
the receiver. A single-system state has a trivial reference.
"""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any, NamedTuple

import numpy as np
import scipy.linalg as la

from .channels import QuantumChannel, apply, complementary, stinespring
from .decoupling import DecouplingExperiment, lhs_estimate
from .entropy import collision_entropy, hmax, tilde_h2_cond
from .tensor import (
    MultipartiteOperator,
    OperatorError,
    PureState,
    SystemLabel,
    SystemRef,
    _check_delta,
    _names,
    partial_trace,
    relabel,
    tensor_product,
    tensor_states,
)

VERTEX_ATOL = 1e-9
ENCODER_MISMATCH = "encoder mismatch dominates"


@dataclass(frozen=True, eq=False)
class ControlState:
    """ω^{A″B″CE} = 𝒰_𝒩(Ω^{A′A″} ⊗ Δ^{B′B″})."""

    omega: PureState
    channel: QuantumChannel
    omega_in: PureState
    delta_in: PureState
    a_ref: SystemLabel
    b_ref: SystemLabel
    environment: SystemLabel

    @property
    def outputs(self) -> tuple[SystemLabel, ...]:
        return self.channel.output_systems

    def density(self) -> MultipartiteOperator:
        return self.omega.density()

    def marginal(self, systems: Sequence[SystemRef]) -> MultipartiteOperator:
        return partial_trace(self.density(), systems)


@dataclass(frozen=True)
class RateQuadruple:
    q_a: float
    e_a: float
    q_b: float
    e_b: float

    def __post_init__(self) -> None:
        for name in ("q_a", "e_a", "q_b", "e_b"):
            if getattr(self, name) < 0:
                raise OperatorError("bad-rate", f"{name} must be non-negative")


@dataclass(frozen=True)
class Constraint:
    """``coefficients · point < bound`` in the plane of the region's axes."""

    label: str
    coefficients: tuple[float, float]
    bound: float
    form: dict[str, float] = field(default_factory=dict)

    def slack(self, point: Sequence[float]) -> float:
        return self.bound - (
            self.coefficients[0] * point[0] + self.coefficients[1] * point[1]
        )

    def to_payload(self) -> dict[str, Any]:
        return {
            "bound": self.bound,
            "coefficients": list(self.coefficients),
            "form": dict(sorted(self.form.items())),
            "label": self.label,
        }


@dataclass(frozen=True)
class RateRegion:
    axes: tuple[str, str]
    constraints: tuple[Constraint, ...]
    vertices: tuple[tuple[float, float], ...]
    error: float | None = None
    fixed: dict[str, float] = field(default_factory=dict)

    def contains(self, point: Sequence[float], atol: float = VERTEX_ATOL) -> bool:
        if point[0] < -atol or point[1] < -atol:
            return False
        return all(constraint.slack(point) >= -atol for constraint in self.constraints)

    @property
    def empty(self) -> bool:
        return not self.vertices

    def to_payload(self) -> dict[str, Any]:
        return {
            "axes": list(self.axes),
            "constraints": [constraint.to_payload() for constraint in self.constraints],
            "error": self.error,
            "fixed": dict(sorted(self.fixed.items())),
            "vertices": [list(vertex) for vertex in self.vertices],
        }


@dataclass(frozen=True)
class ErrorLedger:
    delta_1: float
    delta_2: float
    delta_3: float
    delta_4: float
    entropies: dict[str, float] = field(default_factory=dict)

    @property
    def encoder_mismatch(self) -> bool:
        return self.delta_2 > 1.0 or self.delta_3 > 1.0

    @property
    def flags(self) -> list[str]:
        return [ENCODER_MISMATCH] if self.encoder_mismatch else []

    @property
    def transmission_error(self) -> float:
        """Trace-distance guarantee 2√δ₄ of the decoded state."""
        return 2.0 * math.sqrt(self.delta_4)

    def __iter__(self):
        return iter((self.delta_1, self.delta_2, self.delta_3, self.delta_4))

    def to_payload(self) -> dict[str, Any]:
        return {
            "delta_1": self.delta_1,
            "delta_2": self.delta_2,
            "delta_3": self.delta_3,
            "delta_4": self.delta_4,
            "entropies": dict(sorted(self.entropies.items())),
            "flags": self.flags,
            "transmission_error": self.transmission_error,
        }


class UhlmannResult(NamedTuple):
    isometry: np.ndarray
    fidelity: float


def _split_input(
    state: PureState, channel_input: SystemLabel, role: str
) -> SystemLabel:
    if len(state.systems) != 2:
        raise OperatorError("dimension-mismatch", f"{role} must be a bipartite pure state")
    names = state.names
    if channel_input.name not in names:
        raise OperatorError(
            "unknown-system", f"{role} does not hold channel input {channel_input.name!r}"
        )
    held = state.systems[names.index(channel_input.name)]
    other = state.systems[1 - names.index(channel_input.name)]
    if held.dim != channel_input.dim or other.dim != held.dim:
        raise OperatorError(
            "dimension-mismatch",
            f"{role} needs {other.name!r} and {held.name!r} of dimension {channel_input.dim}",
        )
    return other


def control_state(
    channel: QuantumChannel,
    omega_in: PureState,
    delta_in: PureState,
    environment: str = "E",
) -> ControlState:
    if len(channel.input_systems) != 2:
        raise OperatorError(
            "sender-count", f"a QMAC has two senders, got {list(channel.input_names)}"
        )
    a_in, b_in = channel.input_systems
    a_ref = _split_input(omega_in, a_in, "omega_in")
    b_ref = _split_input(delta_in, b_in, "delta_in")
    dilation = stinespring(channel, environment)
    joint = tensor_states(omega_in, delta_in)
    output = dilation.apply_pure(joint)
    order = [a_ref.name, b_ref.name, *channel.output_names, environment]
    return ControlState(
        omega=output.permute(order),
        channel=channel,
        omega_in=omega_in,
        delta_in=delta_in,
        a_ref=a_ref,
        b_ref=b_ref,
        environment=dilation.environment,
    )


def _message_parts(state: PureState, role: str) -> tuple[SystemLabel, list[SystemLabel]]:
    if not state.systems:
        raise OperatorError("dimension-mismatch", f"{role} holds no systems")
    message = state.systems[0]
    reference = [state.systems[-1]] if len(state.systems) > 1 else []
    return message, reference


def _h2(rho: MultipartiteOperator, cond: Sequence[SystemRef], delta: float) -> float:
    return tilde_h2_cond(rho, cond, delta).value


def error_ledger(
    cs: ControlState, psi: PureState, phi: PureState, delta: float
) -> ErrorLedger:
    delta = _check_delta(delta)
    a_msg, r1 = _message_parts(psi, "psi")
    b_msg, r2 = _message_parts(phi, "phi")
    if a_msg.dim > cs.a_ref.dim or b_msg.dim > cs.b_ref.dim:
        raise OperatorError(
            "dimension-mismatch",
            f"messages {a_msg}, {b_msg} exceed the control systems {cs.a_ref}, {cs.b_ref}",
        )
    joint, alice, bob = _environment_entropies(cs, delta)
    psi_rho = partial_trace(psi.density(), [a_msg, *r1])
    phi_rho = partial_trace(phi.density(), [b_msg, *r2])

    entropies = {
        "H2(A''B''|E)": joint,
        "H2(A''|E)": alice,
        "H2(B''|E)": bob,
        "H2(A'')": collision_entropy(cs.marginal([cs.a_ref])),
        "H2(B'')": collision_entropy(cs.marginal([cs.b_ref])),
        "H2(A|R1)": _h2(psi_rho, r1, delta),
        "H2(B|R2)": _h2(phi_rho, r2, delta),
        "Hmax(A)": hmax(partial_trace(psi_rho, [a_msg])),
        "Hmax(B)": hmax(partial_trace(phi_rho, [b_msg])),
    }
    squared = (
        delta
        + 2.0 ** (-entropies["H2(A''B''|E)"] - entropies["H2(A|R1)"] - entropies["H2(B|R2)"])
        + 2.0 ** (-entropies["H2(B''|E)"] - entropies["H2(B|R2)"])
        + 2.0 ** (-entropies["H2(A''|E)"] - entropies["H2(A|R1)"])
    )
    delta_1 = math.sqrt(squared)
    delta_2 = 2.0 ** ((entropies["Hmax(A)"] - entropies["H2(A'')"]) / 2.0)
    delta_3 = 2.0 ** ((entropies["Hmax(B)"] - entropies["H2(B'')"]) / 2.0)
    delta_4 = (
        delta_1
        + 4.0 * math.sqrt(delta_2)
        + 4.0 * math.sqrt(delta_3)
        + 12.0 * math.sqrt(delta_2 * delta_3)
    )
    return ErrorLedger(delta_1, delta_2, delta_3, delta_4, entropies)


def _line_intersection(first: Constraint, second: Constraint) -> tuple[float, float] | None:
    matrix = np.array([first.coefficients, second.coefficients], dtype=float)
    if abs(np.linalg.det(matrix)) < 1e-12:
        return None
    solution = np.linalg.solve(matrix, np.array([first.bound, second.bound]))
    return float(solution[0]), float(solution[1])


def region_vertices(constraints: Sequence[Constraint]) -> tuple[tuple[float, float], ...]:
    """Feasible corners of the region cut by ``constraints`` from the positive quadrant."""
    lines = list(constraints) + [
        Constraint("axis-0", (-1.0, 0.0), 0.0),
        Constraint("axis-1", (0.0, -1.0), 0.0),
    ]
    found: list[tuple[float, float]] = []
    for index, first in enumerate(lines):
        for second in lines[index + 1 :]:
            point = _line_intersection(first, second)
            if point is None:
                continue
            if any(line.slack(point) < -VERTEX_ATOL for line in lines):
                continue
            if any(
                abs(point[0] - seen[0]) <= VERTEX_ATOL and abs(point[1] - seen[1]) <= VERTEX_ATOL
                for seen in found
            ):
                continue
            found.append((point[0] + 0.0, point[1] + 0.0))
    if len(found) < 3:
        return tuple(sorted(found))
    center_x = sum(point[0] for point in found) / len(found)
    center_y = sum(point[1] for point in found) / len(found)
    found.sort(key=lambda point: math.atan2(point[1] - center_y, point[0] - center_x))
    return tuple(found)


def _environment_entropies(cs: ControlState, delta: float) -> tuple[float, float, float]:
    """H̃(A″B″|E), H̃(A″|E) and H̃(B″|E) of the control state."""
    omega = cs.marginal([cs.a_ref, cs.b_ref, cs.environment])
    env = [cs.environment]
    return (
        _h2(omega, env, delta),
        _h2(partial_trace(omega, [cs.a_ref, cs.environment]), env, delta),
        _h2(partial_trace(omega, [cs.b_ref, cs.environment]), env, delta),
    )


def rate_region(
    cs: ControlState,
    delta: float,
    e_a: float = 0.0,
    e_b: float = 0.0,
    *,
    ledger: ErrorLedger | None = None,
) -> RateRegion:
    """The (Q_A, Q_B) section of the achievable region at fixed assistance rates."""
    delta = _check_delta(delta)
    RateQuadruple(0.0, e_a, 0.0, e_b)
    joint, alice, bob = _environment_entropies(cs, delta)
    alice_local = collision_entropy(cs.marginal([cs.a_ref]))
    bob_local = collision_entropy(cs.marginal([cs.b_ref]))
    penalty = math.log2(1.0 - delta)
    constraints = (
        Constraint(
            "sum",
            (1.0, 1.0),
            joint + 2.0 * penalty + e_a + e_b,
            {"E_A": -1.0, "E_B": -1.0, "Q_A": 1.0, "Q_B": 1.0},
        ),
        Constraint("alice", (1.0, 0.0), alice + penalty + e_a, {"E_A": -1.0, "Q_A": 1.0}),
        Constraint("bob", (0.0, 1.0), bob + penalty + e_b, {"E_B": -1.0, "Q_B": 1.0}),
        Constraint("alice-local", (1.0, 0.0), alice_local - e_a, {"E_A": 1.0, "Q_A": 1.0}),
        Constraint("bob-local", (0.0, 1.0), bob_local - e_b, {"E_B": 1.0, "Q_B": 1.0}),
    )
    return RateRegion(
        axes=("Q_A", "Q_B"),
        constraints=constraints,
        vertices=region_vertices(constraints),
        error=None if ledger is None else ledger.delta_4,
        fixed={"E_A": float(e_a), "E_B": float(e_b), "delta": delta},
    )


def achievable(quadruple: RateQuadruple, cs: ControlState, delta: float) -> bool:
    """Whether the quadruple satisfies every rate constraint strictly."""
    region = rate_region(cs, delta, quadruple.e_a, quadruple.e_b)
    point = (quadruple.q_a, quadruple.q_b)
    return all(constraint.slack(point) > 0 for constraint in region.constraints)


def ent_gen_region(cs: ControlState, delta: float, epsilon: float) -> RateRegion:
    """Entanglement-generation rates (m, n); the error level is √(δ + 6ε)."""
    delta = _check_delta(delta)
    if not 0.0 < epsilon <= 1.0:
        raise OperatorError("bad-epsilon", f"epsilon must lie in (0, 1], got {epsilon!r}")
    joint, alice, bob = _environment_entropies(cs, delta)
    penalty = math.log2(epsilon)
    constraints = (
        Constraint("alice", (1.0, 0.0), alice + penalty, {"m": 1.0}),
        Constraint("bob", (0.0, 1.0), bob + penalty, {"n": 1.0}),
        Constraint("sum", (1.0, 1.0), joint + penalty, {"m": 1.0, "n": 1.0}),
    )
    return RateRegion(
        axes=("m", "n"),
        constraints=constraints,
        vertices=region_vertices(constraints),
        error=math.sqrt(delta + 6.0 * epsilon),
        fixed={"delta": delta, "epsilon": float(epsilon)},
    )


def uhlmann_isometry(
    phi: PureState, psi: PureState, shared: Sequence[SystemRef] | None = None
) -> UhlmannResult:
    """Partial isometry V: Y→Z maximising |⟨ψ|(I⊗V)|φ⟩| for φ on XY and ψ on XZ.

    The shared system X defaults to the names both states carry.
    """
    x_names = _names(shared) if shared is not None else [
        name for name in phi.names if name in psi.names
    ]
    if not x_names:
        raise OperatorError("unknown-system", "the two states share no system")
    for name in x_names:
        if name not in phi.names or name not in psi.names:
            raise OperatorError("unknown-system", f"{name!r} is not held by both states")
        if phi.systems[phi.names.index(name)].dim != psi.systems[psi.names.index(name)].dim:
            raise OperatorError("dimension-mismatch", f"{name!r} differs between the states")
    phi_hat = phi.matrix(x_names)
    psi_hat = psi.matrix(x_names)
    overlap = psi_hat.conj().T @ phi_hat
    left, singular, right_h = la.svd(overlap, full_matrices=False)
    cutoff = max(overlap.shape) * np.finfo(float).eps * (singular[0] if singular.size else 0.0)
    rank = int(np.sum(singular > cutoff))
    isometry = np.conj(left[:, :rank] @ right_h[:rank, :])
    return UhlmannResult(isometry=isometry, fidelity=float(np.sum(singular)))


def encoding_map(
    cs: ControlState, inputs: tuple[str, str] = ("Abar", "Bbar")
) -> QuantumChannel:
    """𝒯(ρ) = |A″B″|·N̄((op(Ω)⊗op(Δ)) ρ (op(Ω)⊗op(Δ))†).

    op(Ω) bends the Ω wire: it maps a copy of A″ to A′ with matrix elements
    ⟨a′|op(Ω)|a″⟩ = ⟨a″a′|Ω⟩, so the Choi state of 𝒯 is ω^{A″B″E}.
    """
    a_in, b_in = cs.channel.input_systems
    op_omega = cs.omega_in.matrix([cs.a_ref]).T
    op_delta = cs.delta_in.matrix([cs.b_ref]).T
    bent = np.kron(op_omega, op_delta)
    environment = complementary(cs.channel, cs.environment.name)
    scale = math.sqrt(cs.a_ref.dim * cs.b_ref.dim)
    kraus = scale * np.einsum("kci,ij->kcj", environment.kraus, bent)
    return QuantumChannel(
        (SystemLabel(inputs[0], cs.a_ref.dim), SystemLabel(inputs[1], cs.b_ref.dim)),
        environment.output_systems,
        kraus,
    )


def _padded_message(
    state: PureState, target: SystemLabel, reference_name: str, role: str
) -> MultipartiteOperator:
    """ψ^{AR} with A embedded into ``target`` and R renamed."""
    message, reference = _message_parts(state, role)
    marginal = partial_trace(state.density(), [message, *reference])
    embedding = QuantumChannel((message,), (target,), np.eye(target.dim, message.dim))
    embedded = apply(embedding, marginal)
    if reference:
        return relabel(embedded, {reference[0].name: reference_name})
    return embedded


def decoupling_check_for_encoding(
    cs: ControlState,
    psi: PureState,
    phi: PureState,
    delta: float,
    samples: int,
    seed: int,
    *,
    max_workers: int | None = None,
) -> dict[str, Any]:
    """Decoupling premise of the encoder: LHS of 𝒯 on ψ⊗φ against δ₁."""
    ledger = error_ledger(cs, psi, phi, delta)
    channel = encoding_map(cs)
    a_bar, b_bar = channel.input_systems
    rho = tensor_product(
        _padded_message(psi, a_bar, "R1", "psi"),
        _padded_message(phi, b_bar, "R2", "phi"),
    )
    diagnostics: Counter[str] = Counter()
    experiment = DecouplingExperiment(channel, rho, delta, samples, seed)
    lhs = lhs_estimate(experiment, max_workers=max_workers, diagnostics=diagnostics)
    limit = ledger.delta_1 + 3.0 * lhs.stderr
    return {
        "delta": _check_delta(delta),
        "delta_1": ledger.delta_1,
        "diagnostics": {key: int(value) for key, value in sorted(diagnostics.items()) if value},
        "lhs_mean": lhs.mean,
        "lhs_stderr": lhs.stderr,
        "passed": lhs.mean <= limit,
        "samples": samples,
        "seed": seed,
    }

