"""Builtin channels and states addressable by name from experiment configs."""

from __future__ import annotations

import difflib
import math
from collections.abc import Callable, Mapping, Sequence
from typing import Any

import numpy as np

from .channels import (
    QuantumChannel,
    channel_from_payload,
    identity_channel,
    random_channel,
    tensor_channels,
)
from .tensor import (
    MultipartiteOperator,
    OperatorError,
    PureState,
    SystemLabel,
    maximally_mixed,
    random_density,
    random_pure_state,
)

DEFAULT_DIMS = (2, 2)
REFERENCE = "R"


class CatalogError(ValueError):
    def __init__(self, kind: str, name: str, known: Sequence[str]):
        self.kind = kind
        self.name = name
        self.suggestions = difflib.get_close_matches(name, known, n=3, cutoff=0.4)
        hint = (
            f"; did you mean {', '.join(self.suggestions)}?"
            if self.suggestions
            else f"; known {kind}s: {', '.join(sorted(known))}"
        )
        super().__init__(f"Unknown builtin {kind} {name!r}{hint}")


def _param(params: Mapping[str, Any], key: str, default: Any) -> Any:
    return params.get(key, default)


def _dims(params: Mapping[str, Any]) -> list[int]:
    dims = _param(params, "dims", list(DEFAULT_DIMS))
    if not isinstance(dims, list) or not dims or not all(
        isinstance(dim, int) and not isinstance(dim, bool) and dim >= 1 for dim in dims
    ):
        raise OperatorError("bad-system", f"dims must be a list of positive integers, got {dims!r}")
    return dims


def _inputs(params: Mapping[str, Any]) -> tuple[SystemLabel, ...]:
    dims = _dims(params)
    names = _param(params, "inputs", [f"A{index}" for index in range(1, len(dims) + 1)])
    if not isinstance(names, list) or len(names) != len(dims):
        raise OperatorError("bad-system", "inputs must name every sender")
    return tuple(SystemLabel(name, dim) for name, dim in zip(names, dims))


def _merged(channel: QuantumChannel, output: str) -> QuantumChannel:
    return QuantumChannel(
        channel.input_systems,
        (SystemLabel(output, channel.output_side),),
        channel.kraus,
    )


def _per_sender(
    params: Mapping[str, Any], block: Callable[[SystemLabel], QuantumChannel]
) -> QuantumChannel:
    combined = None
    for sender in _inputs(params):
        channel = block(sender)
        combined = channel if combined is None else tensor_channels(combined, channel)
    return _merged(combined, _param(params, "output", "E"))


def _weyl(dim: int) -> list[np.ndarray]:
    shift = np.roll(np.eye(dim), 1, axis=0)
    clock = np.diag(np.exp(2j * np.pi * np.arange(dim) / dim))
    return [
        np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b)
        for a in range(dim)
        for b in range(dim)
    ]


def identity(params: Mapping[str, Any]) -> QuantumChannel:
    return _merged(identity_channel(_inputs(params)), _param(params, "output", "E"))


def depolarizing(params: Mapping[str, Any]) -> QuantumChannel:
    """d² Weyl Kraus operators per sender; p=1 is completely depolarizing."""
    p = float(_param(params, "p", 1.0))
    if not 0.0 <= p <= 1.0:
        raise OperatorError("bad-channel", f"depolarizing p must lie in [0, 1], got {p!r}")

    def block(sender: SystemLabel) -> QuantumChannel:
        d = sender.dim
        weights = np.full(d * d, p / (d * d))
        weights[0] += 1.0 - p
        kraus = np.stack([math.sqrt(w) * op for w, op in zip(weights, _weyl(d))])
        return QuantumChannel((sender,), (sender.prime(),), kraus)

    return _per_sender(params, block)


def dephasing(params: Mapping[str, Any]) -> QuantumChannel:
    def block(sender: SystemLabel) -> QuantumChannel:
        kraus = np.stack([np.diag(row) for row in np.eye(sender.dim)])
        return QuantumChannel((sender,), (sender.prime(),), kraus)

    return _per_sender(params, block)


def erasure(params: Mapping[str, Any]) -> QuantumChannel:
    """Each sender is erased to a flag state |d⟩ with probability p."""
    p = float(_param(params, "p", 0.5))
    if not 0.0 <= p <= 1.0:
        raise OperatorError("bad-channel", f"erasure p must lie in [0, 1], got {p!r}")

    def block(sender: SystemLabel) -> QuantumChannel:
        d = sender.dim
        kept = np.zeros((d + 1, d))
        kept[:d, :d] = np.eye(d)
        kraus = [math.sqrt(1.0 - p) * kept]
        for column in range(d):
            flag = np.zeros((d + 1, d))
            flag[d, column] = 1.0
            kraus.append(math.sqrt(p) * flag)
        return QuantumChannel((sender,), (SystemLabel(f"{sender.name}'", d + 1),), np.stack(kraus))

    return _per_sender(params, block)


def haar_random(params: Mapping[str, Any]) -> QuantumChannel:
    inputs = _inputs(params)
    output = SystemLabel(_param(params, "output", "E"), int(_param(params, "output_dim", 2)))
    input_side = math.prod(sender.dim for sender in inputs)
    env = int(_param(params, "env", math.ceil(input_side / output.dim)))
    return random_channel(inputs, output, env, int(_param(params, "seed", 0)))


CHANNELS: dict[str, Callable[[Mapping[str, Any]], QuantumChannel]] = {
    "dephasing": dephasing,
    "depolarizing": depolarizing,
    "erasure-to-E": erasure,
    "identity": identity,
    "random": haar_random,
}

CHANNEL_ALIASES = {"erasure": "erasure-to-E"}


def _reference(dim: int) -> SystemLabel:
    return SystemLabel(REFERENCE, dim)


def max_entangled_state(
    senders: Sequence[SystemLabel], params: Mapping[str, Any]
) -> MultipartiteOperator:
    side = math.prod(sender.dim for sender in senders)
    state = PureState(tuple(senders) + (_reference(side),), np.eye(side).reshape(-1) / math.sqrt(side))
    return state.density()


def maximally_mixed_state(
    senders: Sequence[SystemLabel], params: Mapping[str, Any]
) -> MultipartiteOperator:
    return maximally_mixed(tuple(senders) + (_reference(1),))


def ghz_like_state(
    senders: Sequence[SystemLabel], params: Mapping[str, Any]
) -> MultipartiteOperator:
    dims = {sender.dim for sender in senders}
    if len(dims) != 1:
        raise OperatorError("dimension-mismatch", "a GHZ-like state needs equal sender dims")
    d = dims.pop()
    systems = tuple(senders) + (_reference(d),)
    amplitudes = np.zeros(d ** len(systems))
    for level in range(d):
        amplitudes[sum(level * d**power for power in range(len(systems)))] = 1.0 / math.sqrt(d)
    return PureState(systems, amplitudes).density()


def random_state(
    senders: Sequence[SystemLabel], params: Mapping[str, Any]
) -> MultipartiteOperator:
    side = math.prod(sender.dim for sender in senders)
    reference = _reference(int(_param(params, "reference", side)))
    rank = _param(params, "rank", None)
    return random_density(
        tuple(senders) + (reference,),
        int(_param(params, "seed", 0)),
        None if rank is None else int(rank),
    )


STATES: dict[
    str, Callable[[Sequence[SystemLabel], Mapping[str, Any]], MultipartiteOperator]
] = {
    "ghz-like": ghz_like_state,
    "max-entangled": max_entangled_state,
    "maximally-mixed": maximally_mixed_state,
    "random": random_state,
}

PURE_STATES = ("max-entangled", "product", "random")


def _named(spec: Any, kind: str) -> tuple[str, dict[str, Any]]:
    if isinstance(spec, str):
        return spec, {}
    if isinstance(spec, Mapping) and isinstance(spec.get("name"), str):
        return spec["name"], {key: value for key, value in spec.items() if key != "name"}
    raise OperatorError("bad-spec", f"{kind} must be a builtin name or an object")


def channel_from_spec(spec: Any) -> QuantumChannel:
    if isinstance(spec, Mapping) and "kraus" in spec:
        return channel_from_payload(spec)
    name, params = _named(spec, "channel")
    factory = CHANNELS.get(CHANNEL_ALIASES.get(name, name))
    if factory is None:
        raise CatalogError("channel", name, list(CHANNELS))
    return factory(params)


def _matrix(raw: Any, side: int) -> np.ndarray:
    pairs = np.asarray(raw, dtype=float)
    if pairs.shape != (side, side, 2):
        raise OperatorError(
            "dimension-mismatch", f"matrix must be {side}x{side} of [re, im] pairs"
        )
    return pairs[..., 0] + 1j * pairs[..., 1]


def _systems(raw: Any) -> tuple[SystemLabel, ...]:
    if not isinstance(raw, list) or not raw:
        raise OperatorError("bad-system", "systems must be a non-empty list")
    try:
        return tuple(SystemLabel(item["name"], item["dim"]) for item in raw)
    except (KeyError, TypeError) as exc:
        raise OperatorError("bad-system", "each system needs a name and a dim") from exc


def state_from_spec(spec: Any, senders: Sequence[SystemLabel]) -> MultipartiteOperator:
    """Density operator on the senders plus a reference system R."""
    if isinstance(spec, Mapping) and "matrix" in spec:
        systems = _systems(spec.get("systems"))
        side = math.prod(system.dim for system in systems)
        return MultipartiteOperator(systems, _matrix(spec["matrix"], side))
    name, params = _named(spec, "state")
    factory = STATES.get(name)
    if factory is None:
        raise CatalogError("state", name, list(STATES))
    return factory(senders, params)


def pure_state_from_spec(spec: Any, systems: Sequence[SystemLabel]) -> PureState:
    systems = tuple(systems)
    side = math.prod(system.dim for system in systems)
    if isinstance(spec, Mapping) and "amplitudes" in spec:
        pairs = np.asarray(spec["amplitudes"], dtype=float)
        if pairs.shape != (side, 2):
            raise OperatorError("dimension-mismatch", f"amplitudes must hold {side} [re, im] pairs")
        return PureState(systems, pairs[:, 0] + 1j * pairs[:, 1])
    name, params = _named(spec, "pure state")
    if name == "max-entangled":
        if len(systems) != 2 or systems[0].dim != systems[1].dim:
            raise OperatorError("dimension-mismatch", "max-entangled needs two equal systems")
        return PureState(systems, np.eye(systems[0].dim).reshape(-1) / math.sqrt(systems[0].dim))
    if name == "product":
        amplitudes = np.zeros(side)
        amplitudes[0] = 1.0
        return PureState(systems, amplitudes)
    if name == "random":
        return random_pure_state(systems, int(params.get("seed", 0)))
    raise CatalogError("pure state", name, list(PURE_STATES))


def builtin_catalog() -> dict[str, Any]:
    """Every builtin with its default dimensions."""
    channels = []
    for name, factory in sorted(CHANNELS.items()):
        channel = factory({})
        channels.append(
            {
                "inputs": [sender.dim for sender in channel.input_systems],
                "krausCount": int(channel.kraus.shape[0]),
                "label": f"{name} d={','.join(str(s.dim) for s in channel.input_systems)}",
                "name": name,
                "output": channel.output_system.dim,
                "tp": channel.tp,
            }
        )
    senders = [SystemLabel(f"A{index}", dim) for index, dim in enumerate(DEFAULT_DIMS, start=1)]
    states = []
    for name, factory in sorted(STATES.items()):
        state = factory(senders, {})
        states.append(
            {
                "dims": list(state.dims),
                "label": f"{name} d={','.join(str(dim) for dim in state.dims)}",
                "name": name,
                "systems": list(state.names),
            }
        )
    return {
        "channels": channels,
        "pureStates": list(PURE_STATES),
        "states": states,
    }
