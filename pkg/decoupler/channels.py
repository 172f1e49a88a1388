"""Completely positive maps held as Kraus families.

A channel acts on named input systems of a larger operator and leaves every
other system untouched. Outputs are placed first, followed by the untouched
systems in their original order.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from functools import cached_property
from typing import Any

import numpy as np
import scipy.linalg as la

from .parallel import SeedLike
from .tensor import (
    ATOL,
    MultipartiteOperator,
    OperatorError,
    PureState,
    SystemLabel,
    _check_unique,
    _side,
    haar_unitary,
    partial_trace,
    permute_systems,
)

MIRROR_SUFFIX = "^"


def mirror(system: SystemLabel) -> SystemLabel:
    return system.prime(MIRROR_SUFFIX)


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    input_systems: tuple[SystemLabel, ...]
    output_systems: tuple[SystemLabel, ...]
    kraus: np.ndarray

    def __post_init__(self) -> None:
        inputs = tuple(self.input_systems)
        outputs = tuple(self.output_systems)
        if not inputs or not outputs:
            raise OperatorError("bad-channel", "a channel needs inputs and outputs")
        _check_unique(inputs)
        _check_unique(outputs)
        kraus = np.array(self.kraus, dtype=complex)
        if kraus.ndim == 2:
            kraus = kraus[np.newaxis]
        expected = (_side(outputs), _side(inputs))
        if kraus.ndim != 3 or kraus.shape[0] < 1 or kraus.shape[1:] != expected:
            raise OperatorError(
                "dimension-mismatch",
                f"Kraus operators of shape {kraus.shape[1:]} where {expected} is needed",
            )
        kraus.setflags(write=False)
        object.__setattr__(self, "input_systems", inputs)
        object.__setattr__(self, "output_systems", outputs)
        object.__setattr__(self, "kraus", kraus)

    @property
    def input_names(self) -> tuple[str, ...]:
        return tuple(system.name for system in self.input_systems)

    @property
    def output_names(self) -> tuple[str, ...]:
        return tuple(system.name for system in self.output_systems)

    @property
    def output_system(self) -> SystemLabel:
        if len(self.output_systems) != 1:
            raise OperatorError(
                "dimension-mismatch", f"channel has outputs {list(self.output_names)}"
            )
        return self.output_systems[0]

    @property
    def input_side(self) -> int:
        return self.kraus.shape[2]

    @property
    def output_side(self) -> int:
        return self.kraus.shape[1]

    @cached_property
    def kraus_gram(self) -> np.ndarray:
        """Σ K†K on the inputs."""
        return np.einsum("koi,koj->ij", self.kraus.conj(), self.kraus)

    @cached_property
    def tp(self) -> bool:
        return bool(
            np.allclose(self.kraus_gram, np.eye(self.input_side), rtol=0.0, atol=ATOL)
        )

    @cached_property
    def trace_non_increasing(self) -> bool:
        hermitian = (self.kraus_gram + self.kraus_gram.conj().T) / 2
        return bool(la.eigh(hermitian, eigvals_only=True)[-1] <= 1.0 + ATOL)


@dataclass(frozen=True, eq=False)
class StinespringIsometry:
    matrix: np.ndarray
    input_systems: tuple[SystemLabel, ...]
    output_systems: tuple[SystemLabel, ...]
    environment: SystemLabel

    def as_channel(self) -> QuantumChannel:
        return QuantumChannel(
            self.input_systems, self.output_systems + (self.environment,), self.matrix
        )

    def apply(self, rho: MultipartiteOperator) -> MultipartiteOperator:
        return apply(self.as_channel(), rho)

    def apply_pure(self, state: PureState) -> PureState:
        """V|ψ⟩ with outputs and environment first, then the untouched systems."""
        inputs = list(self.input_systems)
        _check_present(state.systems, inputs)
        input_names = [system.name for system in inputs]
        rest = [system for system in state.systems if system.name not in input_names]
        _check_disjoint(self.output_systems + (self.environment,), rest)
        columns = state.matrix(input_names)
        amplitudes = self.matrix @ columns
        return PureState(
            self.output_systems + (self.environment,) + tuple(rest),
            amplitudes.reshape(-1),
        )


@dataclass(frozen=True, eq=False)
class ChoiState:
    """(𝕀 ⊗ 𝒯)(⊗ᵢ Φ) on the mirror inputs followed by the outputs."""

    state: MultipartiteOperator
    mirrors: tuple[SystemLabel, ...]
    outputs: tuple[SystemLabel, ...]

    def output_marginal(self) -> MultipartiteOperator:
        return partial_trace(self.state, self.outputs)

    def marginal(self, systems: Sequence[SystemLabel | str]) -> MultipartiteOperator:
        return partial_trace(self.state, systems)


def _check_present(
    systems: Sequence[SystemLabel], wanted: Sequence[SystemLabel]
) -> None:
    by_name = {system.name: system for system in systems}
    for system in wanted:
        found = by_name.get(system.name)
        if found is None:
            raise OperatorError(
                "unknown-system", f"{system.name!r} not in {list(by_name)}"
            )
        if found.dim != system.dim:
            raise OperatorError(
                "dimension-mismatch", f"channel expects {system}, operand holds {found}"
            )


def _check_disjoint(
    new: Sequence[SystemLabel], rest: Sequence[SystemLabel]
) -> None:
    clash = {system.name for system in new}.intersection(system.name for system in rest)
    if clash:
        raise OperatorError("system-clash", f"{sorted(clash)} already present")


def _split(
    x: MultipartiteOperator, head: Sequence[SystemLabel]
) -> tuple[np.ndarray, tuple[SystemLabel, ...]]:
    _check_present(x.systems, head)
    head_names = [system.name for system in head]
    rest = tuple(system for system in x.systems if system.name not in head_names)
    ordered = permute_systems(x, head_names + [system.name for system in rest])
    head_side = _side(head)
    rest_side = _side(rest)
    return ordered.entries.reshape(head_side, rest_side, head_side, rest_side), rest


def apply(ch: QuantumChannel, rho: MultipartiteOperator) -> MultipartiteOperator:
    """Σ_k (K_k ⊗ I) ρ (K_k ⊗ I)† with the channel acting on its named inputs."""
    tensor, rest = _split(rho, ch.input_systems)
    _check_disjoint(ch.output_systems, rest)
    out = np.einsum(
        "koi,iajb,kpj->oapb", ch.kraus, tensor, ch.kraus.conj(), optimize=True
    )
    side = ch.output_side * _side(rest)
    return MultipartiteOperator(ch.output_systems + rest, out.reshape(side, side))


def adjoint_apply(ch: QuantumChannel, x: MultipartiteOperator) -> MultipartiteOperator:
    """Σ_k K_k† x K_k, the map with ⟨𝒯†(A), B⟩ = ⟨A, 𝒯(B)⟩."""
    tensor, rest = _split(x, ch.output_systems)
    _check_disjoint(ch.input_systems, rest)
    out = np.einsum(
        "koi,oapb,kpj->iajb", ch.kraus.conj(), tensor, ch.kraus, optimize=True
    )
    side = ch.input_side * _side(rest)
    return MultipartiteOperator(ch.input_systems + rest, out.reshape(side, side))


def _require_tp(ch: QuantumChannel) -> None:
    if not ch.tp:
        raise OperatorError(
            "not-trace-preserving", f"channel on {list(ch.input_names)} is not tp"
        )


def stinespring(ch: QuantumChannel, environment: str = "E") -> StinespringIsometry:
    _require_tp(ch)
    count = ch.kraus.shape[0]
    matrix = ch.kraus.transpose(1, 0, 2).reshape(ch.output_side * count, ch.input_side)
    return StinespringIsometry(
        matrix=matrix,
        input_systems=ch.input_systems,
        output_systems=ch.output_systems,
        environment=SystemLabel(environment, count),
    )


def complementary(ch: QuantumChannel, environment: str = "E") -> QuantumChannel:
    """ρ ↦ Tr_output[VρV†], with the environment basis in Kraus order."""
    _require_tp(ch)
    return QuantumChannel(
        ch.input_systems,
        (SystemLabel(environment, ch.kraus.shape[0]),),
        ch.kraus.transpose(1, 0, 2),
    )


def choi(ch: QuantumChannel) -> ChoiState:
    mirrors = tuple(mirror(system) for system in ch.input_systems)
    _check_disjoint(mirrors, ch.output_systems)
    # (I ⊗ K)|Φ⟩ is the row-major vectorisation of Kᵀ / √d.
    vectors = ch.kraus.transpose(0, 2, 1).reshape(ch.kraus.shape[0], -1)
    vectors = vectors / math.sqrt(ch.input_side)
    state = MultipartiteOperator(
        mirrors + ch.output_systems, vectors.T @ vectors.conj()
    )
    return ChoiState(state=state, mirrors=mirrors, outputs=ch.output_systems)


def postcompose(ch: QuantumChannel, op: MultipartiteOperator) -> QuantumChannel:
    """The CP map ρ ↦ op·𝒯(ρ)·op† for an operator on the channel outputs."""
    aligned = permute_systems(op, ch.output_names)
    if aligned.dims != tuple(system.dim for system in ch.output_systems):
        raise OperatorError("dimension-mismatch", "operator does not fit the outputs")
    return QuantumChannel(
        ch.input_systems,
        ch.output_systems,
        np.einsum("po,koi->kpi", aligned.entries, ch.kraus),
    )


def tensor_channels(first: QuantumChannel, second: QuantumChannel) -> QuantumChannel:
    kraus = np.einsum("aoi,bpj->abopij", first.kraus, second.kraus).reshape(
        first.kraus.shape[0] * second.kraus.shape[0],
        first.output_side * second.output_side,
        first.input_side * second.input_side,
    )
    return QuantumChannel(
        first.input_systems + second.input_systems,
        first.output_systems + second.output_systems,
        kraus,
    )


def rename_channel(ch: QuantumChannel, mapping: Mapping[str, str]) -> QuantumChannel:
    """Rename input and output systems; a name present on both sides renames both."""
    known = set(ch.input_names).union(ch.output_names)
    unknown = set(mapping).difference(known)
    if unknown:
        raise OperatorError("unknown-system", f"cannot rename {sorted(unknown)}")

    def renamed(systems: tuple[SystemLabel, ...]) -> tuple[SystemLabel, ...]:
        return tuple(
            SystemLabel(mapping.get(system.name, system.name), system.dim)
            for system in systems
        )

    return QuantumChannel(renamed(ch.input_systems), renamed(ch.output_systems), ch.kraus)


def identity_channel(systems: Sequence[SystemLabel]) -> QuantumChannel:
    systems = tuple(systems)
    return QuantumChannel(systems, systems, np.eye(_side(systems))[np.newaxis])


def random_channel(
    inputs: Sequence[SystemLabel],
    output: SystemLabel,
    env: int,
    seed: SeedLike = None,
) -> QuantumChannel:
    """Kraus family cut from the first columns of a Haar unitary on output ⊗ env."""
    inputs = tuple(inputs)
    input_side = _side(inputs)
    if env < 1 or env * output.dim < input_side:
        raise OperatorError(
            "dimension-mismatch",
            f"output {output.dim} x env {env} cannot hold input dimension {input_side}",
        )
    unitary = haar_unitary(output.dim * env, seed)
    isometry = unitary[:, :input_side]
    kraus = isometry.reshape(output.dim, env, input_side).transpose(1, 0, 2)
    return QuantumChannel(inputs, (output,), kraus)


def _range_isometry(projector: MultipartiteOperator) -> np.ndarray:
    if len(projector.systems) != 1:
        raise OperatorError("not-projector", "each projector acts on one sender")
    entries = projector.entries
    if not projector.is_hermitian or not np.allclose(
        entries @ entries, entries, rtol=0.0, atol=ATOL
    ):
        raise OperatorError(
            "not-projector", f"operator on {projector.names[0]!r} is not a projector"
        )
    values, vectors = la.eigh((entries + entries.conj().T) / 2)
    columns = vectors[:, values > 0.5]
    if columns.shape[1] == 0:
        raise OperatorError("not-projector", f"projector on {projector.names[0]!r} has rank 0")
    return columns.conj().T


def coordinate_projector(system: SystemLabel, rank: int) -> MultipartiteOperator:
    if not 1 <= rank <= system.dim:
        raise OperatorError(
            "not-projector", f"rank {rank} does not fit {system}"
        )
    diagonal = np.zeros(system.dim)
    diagonal[:rank] = 1.0
    return MultipartiteOperator((system,), np.diag(diagonal))


def projector_compression(
    projectors: Sequence[MultipartiteOperator],
    outputs: Sequence[str] | None = None,
) -> QuantumChannel:
    """The CP map ∏(|Aᵢ|/|Eᵢ|)·⊗Πᵢ with each projector compressed onto its range."""
    if not projectors:
        raise OperatorError("not-projector", "at least one projector is required")
    names = list(outputs) if outputs is not None else [
        f"E{index}" for index in range(1, len(projectors) + 1)
    ]
    if len(names) != len(projectors):
        raise OperatorError("dimension-mismatch", "one output name per projector")
    inputs: list[SystemLabel] = []
    outs: list[SystemLabel] = []
    kraus = np.ones((1, 1), dtype=complex)
    scale = 1.0
    for projector, name in zip(projectors, names):
        isometry = _range_isometry(projector)
        inputs.append(projector.systems[0])
        outs.append(SystemLabel(name, isometry.shape[0]))
        scale *= projector.systems[0].dim / isometry.shape[0]
        kraus = np.kron(kraus, isometry)
    return QuantumChannel(tuple(inputs), tuple(outs), math.sqrt(scale) * kraus)


def channel_to_payload(ch: QuantumChannel) -> dict[str, Any]:
    payload: dict[str, Any] = {
        "inputs": [system.dim for system in ch.input_systems],
        "input_names": list(ch.input_names),
        "kraus": [
            [[float(value.real), float(value.imag)] for value in matrix.reshape(-1)]
            for matrix in ch.kraus
        ],
    }
    if len(ch.output_systems) == 1:
        payload["output"] = ch.output_system.dim
        payload["output_name"] = ch.output_system.name
    else:
        payload["outputs"] = [system.dim for system in ch.output_systems]
        payload["output_names"] = list(ch.output_names)
    return payload


def _dims(value: Any, field: str) -> list[int]:
    if not isinstance(value, list) or not value or not all(
        isinstance(item, int) and not isinstance(item, bool) and item >= 1
        for item in value
    ):
        raise OperatorError("bad-channel", f"{field!r} must be a list of positive integers")
    return value


def _names(value: Any, default: list[str], field: str) -> list[str]:
    if value is None:
        return default
    if not isinstance(value, list) or len(value) != len(default) or not all(
        isinstance(item, str) and item for item in value
    ):
        raise OperatorError("bad-channel", f"{field!r} must list {len(default)} names")
    return value


def channel_from_payload(payload: Mapping[str, Any]) -> QuantumChannel:
    input_dims = _dims(payload.get("inputs"), "inputs")
    input_names = _names(
        payload.get("input_names"),
        [f"A{index}" for index in range(1, len(input_dims) + 1)],
        "input_names",
    )
    if "outputs" in payload:
        output_dims = _dims(payload.get("outputs"), "outputs")
        output_names = _names(
            payload.get("output_names"),
            [f"E{index}" for index in range(1, len(output_dims) + 1)],
            "output_names",
        )
    else:
        output_dims = _dims([payload.get("output")], "output")
        output_names = _names(
            None if payload.get("output_name") is None else [payload.get("output_name")],
            ["E"],
            "output_name",
        )
    rows = math.prod(output_dims)
    columns = math.prod(input_dims)
    raw = payload.get("kraus")
    if not isinstance(raw, list) or not raw:
        raise OperatorError("bad-channel", "'kraus' must be a non-empty list")
    matrices = []
    for position, flat in enumerate(raw):
        try:
            pairs = np.asarray(flat, dtype=float)
        except (TypeError, ValueError) as exc:
            raise OperatorError(
                "bad-channel", f"kraus[{position}] must hold [re, im] pairs"
            ) from exc
        if pairs.shape != (rows * columns, 2):
            raise OperatorError(
                "bad-channel",
                f"kraus[{position}] needs {rows * columns} [re, im] pairs",
            )
        matrices.append((pairs[:, 0] + 1j * pairs[:, 1]).reshape(rows, columns))
    return QuantumChannel(
        tuple(SystemLabel(name, dim) for name, dim in zip(input_names, input_dims)),
        tuple(SystemLabel(name, dim) for name, dim in zip(output_names, output_dims)),
        np.stack(matrices),
    )
