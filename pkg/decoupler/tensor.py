"""Multipartite dense linear algebra on labelled subsystems.

Every operator carries the ordered list of subsystems it acts on, so partial
traces, permutations and local actions are addressed by system name rather
than by axis position.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np
import scipy.linalg as la

from .parallel import SeedLike, as_generator

ATOL = 1e-10
_INVERSE_POWERS = {Fraction(-1), Fraction(-1, 2), Fraction(-1, 4)}


class OperatorError(ValueError):
    """Raised when an operand violates the contract of an operation."""

    def __init__(self, label: str, detail: str = ""):
        self.label = label
        suffix = f": {detail}" if detail else ""
        super().__init__(f"{label}{suffix}")


class TruncationError(RuntimeError):
    def __init__(self, detail: str = ""):
        self.label = "empty-support"
        suffix = f": {detail}" if detail else ""
        super().__init__(f"empty-support{suffix}")


@dataclass(frozen=True)
class SystemLabel:
    name: str
    dim: int

    def __post_init__(self) -> None:
        if not isinstance(self.name, str) or not self.name.strip():
            raise OperatorError("bad-system", "system names must be non-empty")
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 1:
            raise OperatorError(
                "bad-system", f"system {self.name!r} needs a positive dimension"
            )
        object.__setattr__(self, "dim", int(self.dim))

    def prime(self, suffix: str = "'") -> "SystemLabel":
        return SystemLabel(f"{self.name}{suffix}", self.dim)

    def __str__(self) -> str:
        return f"{self.name}[{self.dim}]"


SystemRef = str | SystemLabel


def _name(system: SystemRef) -> str:
    return system.name if isinstance(system, SystemLabel) else str(system)


def _names(systems: Iterable[SystemRef]) -> list[str]:
    return [_name(system) for system in systems]


def _check_unique(systems: Sequence[SystemLabel]) -> None:
    seen: set[str] = set()
    for system in systems:
        if not isinstance(system, SystemLabel):
            raise OperatorError("bad-system", f"{system!r} is not a SystemLabel")
        if system.name in seen:
            raise OperatorError("system-clash", f"system {system.name!r} repeats")
        seen.add(system.name)


def _side(systems: Sequence[SystemLabel]) -> int:
    return math.prod(system.dim for system in systems)


def _zero_cutoff(values: np.ndarray, side: int) -> float:
    largest = float(np.max(np.abs(values))) if values.size else 0.0
    return side * np.finfo(float).eps * largest


@dataclass(frozen=True, eq=False)
class MultipartiteOperator:
    systems: tuple[SystemLabel, ...]
    entries: np.ndarray

    def __post_init__(self) -> None:
        systems = tuple(self.systems)
        _check_unique(systems)
        entries = np.array(self.entries, dtype=complex)
        side = _side(systems)
        if entries.shape != (side, side):
            raise OperatorError(
                "dimension-mismatch",
                f"matrix shape {entries.shape} does not match systems "
                + " ".join(str(system) for system in systems),
            )
        entries.setflags(write=False)
        object.__setattr__(self, "systems", systems)
        object.__setattr__(self, "entries", entries)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(system.name for system in self.systems)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(system.dim for system in self.systems)

    @property
    def side(self) -> int:
        return self.entries.shape[0]

    def system(self, name: SystemRef) -> SystemLabel:
        wanted = _name(name)
        for system in self.systems:
            if system.name == wanted:
                return system
        raise OperatorError("unknown-system", f"{wanted!r} not in {list(self.names)}")

    @cached_property
    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    @cached_property
    def is_hermitian(self) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.entries), initial=0.0)))
        return bool(
            np.allclose(self.entries, self.entries.conj().T, rtol=0.0, atol=ATOL * scale)
        )

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """Ascending eigenvalues of the Hermitian part."""
        hermitian = (self.entries + self.entries.conj().T) / 2
        return la.eigh(hermitian, eigvals_only=True)

    @cached_property
    def is_psd(self) -> bool:
        if not self.is_hermitian:
            return False
        values = self.eigenvalues
        scale = max(1.0, float(np.max(np.abs(values), initial=0.0)))
        return bool(values[0] >= -ATOL * scale) if values.size else True

    @cached_property
    def is_density(self) -> bool:
        return self.is_psd and abs(self.trace - 1.0) <= ATOL

    def dagger(self) -> "MultipartiteOperator":
        return MultipartiteOperator(self.systems, self.entries.conj().T)

    def scaled(self, factor: complex) -> "MultipartiteOperator":
        return MultipartiteOperator(self.systems, factor * self.entries)

    def _aligned(self, other: "MultipartiteOperator") -> np.ndarray:
        if other.names == self.names:
            if other.dims != self.dims:
                raise OperatorError("dimension-mismatch", "systems differ in dimension")
            return other.entries
        if sorted(other.names) != sorted(self.names):
            raise OperatorError(
                "unknown-system",
                f"cannot combine {list(self.names)} with {list(other.names)}",
            )
        return permute_systems(other, self.names).entries

    def __add__(self, other: "MultipartiteOperator") -> "MultipartiteOperator":
        return MultipartiteOperator(self.systems, self.entries + self._aligned(other))

    def __sub__(self, other: "MultipartiteOperator") -> "MultipartiteOperator":
        return MultipartiteOperator(self.systems, self.entries - self._aligned(other))

    def __matmul__(self, other: "MultipartiteOperator") -> "MultipartiteOperator":
        return MultipartiteOperator(self.systems, self.entries @ self._aligned(other))


@dataclass(frozen=True, eq=False)
class PureState:
    systems: tuple[SystemLabel, ...]
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        systems = tuple(self.systems)
        _check_unique(systems)
        amplitudes = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amplitudes.size != _side(systems):
            raise OperatorError(
                "dimension-mismatch",
                f"{amplitudes.size} amplitudes for systems of size {_side(systems)}",
            )
        norm = float(np.linalg.norm(amplitudes))
        if abs(norm - 1.0) > ATOL:
            raise OperatorError("not-normalized", f"state norm is {norm!r}")
        amplitudes.setflags(write=False)
        object.__setattr__(self, "systems", systems)
        object.__setattr__(self, "amplitudes", amplitudes)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(system.name for system in self.systems)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(system.dim for system in self.systems)

    def density(self) -> MultipartiteOperator:
        return MultipartiteOperator(
            self.systems, np.outer(self.amplitudes, self.amplitudes.conj())
        )

    def permute(self, order: Sequence[SystemRef]) -> "PureState":
        index = _permutation_index(self.names, order)
        tensor = self.amplitudes.reshape(self.dims).transpose(index)
        return PureState(tuple(self.systems[i] for i in index), tensor.reshape(-1))

    def matrix(self, rows: Sequence[SystemRef]) -> np.ndarray:
        """Reshape the amplitudes into a (rows x remaining systems) matrix."""
        row_names = _names(rows)
        rest = [name for name in self.names if name not in row_names]
        ordered = self.permute(row_names + rest)
        row_side = math.prod(ordered.dims[: len(row_names)])
        return ordered.amplitudes.reshape(row_side, -1)


def operator(systems: Sequence[SystemLabel], matrix: np.ndarray) -> MultipartiteOperator:
    return MultipartiteOperator(tuple(systems), matrix)


def identity(systems: Sequence[SystemLabel]) -> MultipartiteOperator:
    return MultipartiteOperator(tuple(systems), np.eye(_side(systems)))


def maximally_mixed(systems: Sequence[SystemLabel]) -> MultipartiteOperator:
    side = _side(systems)
    return MultipartiteOperator(tuple(systems), np.eye(side) / side)


def tensor_product(
    x: MultipartiteOperator, y: MultipartiteOperator
) -> MultipartiteOperator:
    clash = set(x.names).intersection(y.names)
    if clash:
        raise OperatorError("system-clash", f"both operands hold {sorted(clash)}")
    return MultipartiteOperator(x.systems + y.systems, np.kron(x.entries, y.entries))


def tensor_states(x: PureState, y: PureState) -> PureState:
    clash = set(x.names).intersection(y.names)
    if clash:
        raise OperatorError("system-clash", f"both states hold {sorted(clash)}")
    return PureState(x.systems + y.systems, np.kron(x.amplitudes, y.amplitudes))


def _permutation_index(names: Sequence[str], order: Sequence[SystemRef]) -> list[int]:
    wanted = _names(order)
    if sorted(wanted) != sorted(names) or len(set(wanted)) != len(wanted):
        raise OperatorError(
            "bad-permutation", f"{wanted} is not a permutation of {list(names)}"
        )
    return [list(names).index(name) for name in wanted]


def permute_systems(
    x: MultipartiteOperator, order: Sequence[SystemRef]
) -> MultipartiteOperator:
    index = _permutation_index(x.names, order)
    if index == list(range(len(index))):
        return x
    n = len(index)
    tensor = x.entries.reshape(x.dims * 2).transpose(index + [n + i for i in index])
    return MultipartiteOperator(
        tuple(x.systems[i] for i in index), tensor.reshape(x.side, x.side)
    )


def relabel(x: MultipartiteOperator, mapping: Mapping[str, str]) -> MultipartiteOperator:
    unknown = set(mapping).difference(x.names)
    if unknown:
        raise OperatorError("unknown-system", f"cannot relabel {sorted(unknown)}")
    systems = tuple(
        SystemLabel(mapping.get(system.name, system.name), system.dim)
        for system in x.systems
    )
    return MultipartiteOperator(systems, x.entries)


def partial_trace(
    x: MultipartiteOperator, keep: Iterable[SystemRef]
) -> MultipartiteOperator:
    """Trace out every system not in ``keep``; kept systems stay in x's order."""
    keep_names = set(_names(keep))
    unknown = keep_names.difference(x.names)
    if unknown:
        raise OperatorError("unknown-system", f"{sorted(unknown)} not in {list(x.names)}")
    kept = [i for i, name in enumerate(x.names) if name in keep_names]
    traced = [i for i, name in enumerate(x.names) if name not in keep_names]
    if not traced:
        return x
    n = len(x.systems)
    kept_side = math.prod(x.dims[i] for i in kept)
    traced_side = math.prod(x.dims[i] for i in traced)
    tensor = x.entries.reshape(x.dims * 2).transpose(
        kept + traced + [n + i for i in kept] + [n + i for i in traced]
    )
    tensor = tensor.reshape(kept_side, traced_side, kept_side, traced_side)
    return MultipartiteOperator(
        tuple(x.systems[i] for i in kept), np.einsum("iaja->ij", tensor)
    )


def embed(
    x: MultipartiteOperator, systems: Sequence[SystemLabel]
) -> MultipartiteOperator:
    """Extend ``x`` by the identity on the other ``systems``, in their order."""
    names = _names(systems)
    missing = set(x.names).difference(names)
    if missing:
        raise OperatorError("unknown-system", f"{sorted(missing)} not in {names}")
    rest = [system for system in systems if system.name not in x.names]
    full = tensor_product(x, identity(rest)) if rest else x
    return permute_systems(full, names)


def conjugate_local(
    x: MultipartiteOperator, local: Mapping[str, np.ndarray]
) -> MultipartiteOperator:
    """Return (⊗ L_i) x (⊗ L_i)† for square local operators keyed by system name."""
    n = len(x.systems)
    tensor = x.entries.reshape(x.dims * 2)
    for name, matrix in local.items():
        axis = x.names.index(x.system(name).name)
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.shape != (x.dims[axis], x.dims[axis]):
            raise OperatorError(
                "dimension-mismatch",
                f"local operator {matrix.shape} on {x.systems[axis]}",
            )
        tensor = np.moveaxis(np.tensordot(matrix, tensor, axes=([1], [axis])), 0, axis)
        tensor = np.moveaxis(
            np.tensordot(tensor, matrix.conj(), axes=([n + axis], [1])), -1, n + axis
        )
    return MultipartiteOperator(x.systems, tensor.reshape(x.side, x.side))


def swap_operator(
    a: SystemLabel, a_prime: SystemLabel | None = None
) -> MultipartiteOperator:
    partner = a_prime or a.prime()
    if partner.dim != a.dim:
        raise OperatorError("dimension-mismatch", f"cannot swap {a} with {partner}")
    d = a.dim
    index = np.arange(d * d)
    first, second = np.divmod(index, d)
    matrix = np.zeros((d * d, d * d))
    matrix[index, second * d + first] = 1.0
    return MultipartiteOperator((a, partner), matrix)


def max_entangled(a: SystemLabel, a_prime: SystemLabel) -> PureState:
    if a.dim != a_prime.dim:
        raise OperatorError(
            "dimension-mismatch", f"{a} and {a_prime} need equal dimensions"
        )
    return PureState((a, a_prime), np.eye(a.dim).reshape(-1) / math.sqrt(a.dim))


def _spectrum(x: MultipartiteOperator) -> tuple[np.ndarray, np.ndarray]:
    if not x.is_psd:
        raise OperatorError("not-psd", f"operator on {list(x.names)} is not PSD")
    hermitian = (x.entries + x.entries.conj().T) / 2
    return la.eigh(hermitian)


def psd_power(x: MultipartiteOperator, power: float) -> MultipartiteOperator:
    """Spectral power on the support; eigenvalues below the cutoff map to zero."""
    values, vectors = _spectrum(x)
    support = values > _zero_cutoff(values, x.side)
    mapped = np.zeros_like(values)
    mapped[support] = values[support] ** float(power)
    return MultipartiteOperator(x.systems, (vectors * mapped) @ vectors.conj().T)


def support_projector(x: MultipartiteOperator) -> MultipartiteOperator:
    return psd_power(x, 0.0)


def pseudo_inverse(
    s: MultipartiteOperator, power: float | Fraction = -1
) -> MultipartiteOperator:
    exponent = Fraction(power).limit_denominator(16)
    if exponent not in _INVERSE_POWERS:
        raise OperatorError("bad-power", f"power {power!r} not in -1, -1/2, -1/4")
    return psd_power(s, float(exponent))


@dataclass(frozen=True)
class Truncation:
    kept: MultipartiteOperator
    delta: float
    removed_mass: float
    rank: int


def _check_delta(delta: float) -> float:
    value = float(delta)
    if not 0.0 <= value < 1.0:
        raise OperatorError("bad-delta", f"delta must lie in [0, 1), got {delta!r}")
    return value


def truncation(rho: MultipartiteOperator, delta: float) -> Truncation:
    """Zero the longest ascending run of eigenvalues whose mass stays within delta."""
    delta = _check_delta(delta)
    values, vectors = _spectrum(rho)
    clipped = np.clip(values, 0.0, None)
    cutoff = _zero_cutoff(values, rho.side)
    if delta == 0.0:
        return Truncation(rho, 0.0, 0.0, int(np.sum(clipped > cutoff)))

    order = np.argsort(clipped, kind="stable")
    removed = int(np.searchsorted(np.cumsum(clipped[order]), delta, side="right"))
    survivors = clipped.copy()
    survivors[order[:removed]] = 0.0
    kept = MultipartiteOperator(
        rho.systems, (vectors * survivors) @ vectors.conj().T
    )
    return Truncation(
        kept=kept,
        delta=delta,
        removed_mass=float(np.sum(clipped[order[:removed]])),
        rank=int(np.sum(survivors > cutoff)),
    )


def delta_truncate(rho: MultipartiteOperator, delta: float) -> MultipartiteOperator:
    return truncation(rho, delta).kept


def schatten_norm(x: MultipartiteOperator, p: int = 1) -> float:
    if p == 2:
        return float(la.norm(x.entries))
    if p != 1:
        raise OperatorError("bad-norm", f"only Schatten 1 and 2 norms, got {p!r}")
    if x.is_hermitian:
        return float(np.sum(np.abs(x.eigenvalues)))
    return float(np.sum(la.svdvals(x.entries)))


def purity(x: MultipartiteOperator) -> float:
    """Tr[x²] for Hermitian x."""
    return float(np.real(np.vdot(x.entries.conj().T, x.entries)))


def purify(rho: MultipartiteOperator, purifier: SystemLabel) -> PureState:
    if not rho.is_density:
        raise OperatorError("not-density", f"operator on {list(rho.names)}")
    if purifier.name in rho.names:
        raise OperatorError("system-clash", f"purifier {purifier.name!r} already used")
    values, vectors = _spectrum(rho)
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]
    rank = int(np.sum(values > _zero_cutoff(values, rho.side)))
    if purifier.dim < rank:
        raise OperatorError(
            "purifier-too-small", f"rank {rank} needs a purifier of at least that size"
        )
    amplitudes = np.zeros((rho.side, purifier.dim), dtype=complex)
    for i in range(rank):
        vector = vectors[:, i]
        pivot = vector[np.argmax(np.abs(vector))]
        amplitudes[:, i] = math.sqrt(values[i]) * vector * (abs(pivot) / pivot)
    amplitudes = amplitudes.reshape(-1)
    return PureState(
        rho.systems + (purifier,), amplitudes / np.linalg.norm(amplitudes)
    )


def fidelity(rho: MultipartiteOperator, sigma: MultipartiteOperator) -> float:
    """Root fidelity ‖√ρ √σ‖₁ between PSD operators on the same systems."""
    root_rho = psd_power(rho, 0.5)
    root_sigma = psd_power(sigma, 0.5)
    return float(np.sum(la.svdvals((root_rho @ root_sigma).entries)))


def random_density(
    systems: Sequence[SystemLabel], seed: SeedLike = None, rank: int | None = None
) -> MultipartiteOperator:
    rng = as_generator(seed)
    side = _side(systems)
    columns = side if rank is None else max(1, min(rank, side))
    ginibre = rng.standard_normal((side, columns)) + 1j * rng.standard_normal(
        (side, columns)
    )
    matrix = ginibre @ ginibre.conj().T
    return MultipartiteOperator(tuple(systems), matrix / np.trace(matrix).real)


def random_pure_state(systems: Sequence[SystemLabel], seed: SeedLike = None) -> PureState:
    rng = as_generator(seed)
    side = _side(systems)
    vector = rng.standard_normal(side) + 1j * rng.standard_normal(side)
    return PureState(tuple(systems), vector / np.linalg.norm(vector))


def random_hermitian(
    systems: Sequence[SystemLabel], seed: SeedLike = None
) -> MultipartiteOperator:
    rng = as_generator(seed)
    side = _side(systems)
    matrix = rng.standard_normal((side, side)) + 1j * rng.standard_normal((side, side))
    return MultipartiteOperator(tuple(systems), (matrix + matrix.conj().T) / 2)


def haar_unitary(dim: int, seed: SeedLike = None) -> np.ndarray:
    """Haar-distributed unitary from the QR of a complex Ginibre matrix."""
    if dim < 1:
        raise OperatorError("bad-system", f"unitary dimension must be positive, got {dim}")
    rng = as_generator(seed)
    ginibre = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = la.qr(ginibre)
    diagonal = np.diagonal(r)
    phases = np.where(np.abs(diagonal) > 0, diagonal / np.abs(diagonal), 1.0)
    return q * phases
