"""Second-moment Haar twirls of k senders in tensor product.

Each sender contributes a doubled system pair (A, A'). The twirl of M is
expanded over the commutant basis ⊗ᵢ F^{aᵢ}, indexed by bit strings whose
first character belongs to the first pair. Coefficients come from the closed
form inverse of the Gram matrix K, which factorises into 2x2 blocks.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .channels import (
    QuantumChannel,
    adjoint_apply,
    choi,
    mirror,
    rename_channel,
    tensor_channels,
)
from .parallel import SeedLike, as_generator, sum_samples
from .tensor import (
    ATOL,
    MultipartiteOperator,
    OperatorError,
    SystemLabel,
    SystemRef,
    conjugate_local,
    haar_unitary,
    identity,
    permute_systems,
    schatten_norm,
    swap_operator,
    tensor_product,
)

Pair = tuple[SystemLabel, SystemLabel]


@dataclass(frozen=True, eq=False)
class CommutantBasisElement:
    bits: str
    operator: MultipartiteOperator


@dataclass(frozen=True, eq=False)
class TwirlResult:
    alphas: dict[str, float]
    moments: dict[str, float]
    reconstructed: MultipartiteOperator
    dims: tuple[int, ...]
    gram_residual: float = 0.0

    def alpha_vector(self) -> np.ndarray:
        return np.array([self.alphas[bits] for bits in bit_strings(len(self.dims))])

    def moment_vector(self) -> np.ndarray:
        return np.array([self.moments[bits] for bits in bit_strings(len(self.dims))])


@dataclass
class AlphaBoundsReport:
    bounds: dict[str, float]
    slack: dict[str, float]
    violations: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_payload(self) -> dict[str, object]:
        return {
            "bounds": dict(sorted(self.bounds.items())),
            "passed": self.passed,
            "slack": dict(sorted(self.slack.items())),
            "violations": list(self.violations),
        }


def bit_strings(k: int) -> list[str]:
    return ["".join(bits) for bits in itertools.product("01", repeat=k)]


def sample_haar(dim: int, seed: SeedLike = None, name: str = "U") -> MultipartiteOperator:
    return MultipartiteOperator((SystemLabel(name, dim),), haar_unitary(dim, seed))


def resolve_pairs(
    m: MultipartiteOperator, pairs: Sequence[tuple[SystemRef, SystemRef]] | None = None
) -> list[Pair]:
    """Sender pairs of ``m``; by default consecutive systems (A1, A1', A2, A2', ...)."""
    if pairs is None:
        if len(m.systems) % 2:
            raise OperatorError(
                "dimension-mismatch", "an odd number of systems cannot be paired"
            )
        resolved = [
            (m.systems[index], m.systems[index + 1])
            for index in range(0, len(m.systems), 2)
        ]
    else:
        resolved = [(m.system(first), m.system(second)) for first, second in pairs]
    paired = [system.name for pair in resolved for system in pair]
    if sorted(paired) != sorted(m.names) or len(set(paired)) != len(paired):
        raise OperatorError(
            "bad-permutation", f"pairs {paired} must cover {list(m.names)} exactly once"
        )
    for first, second in resolved:
        if first.dim != second.dim:
            raise OperatorError(
                "dimension-mismatch", f"paired systems {first} and {second} differ"
            )
    return resolved


def _check_dims(pairs: Sequence[Pair], dims: Sequence[int] | None) -> None:
    if dims is not None and [first.dim for first, _ in pairs] != list(dims):
        raise OperatorError(
            "dimension-mismatch",
            f"sender dims {[first.dim for first, _ in pairs]} differ from {list(dims)}",
        )


def basis_element(
    bits: str, pairs: Sequence[Pair], order: Sequence[str] | None = None
) -> CommutantBasisElement:
    if len(bits) != len(pairs) or set(bits) - {"0", "1"}:
        raise OperatorError("bad-bits", f"{bits!r} does not index {len(pairs)} senders")
    operator = None
    for bit, (first, second) in zip(bits, pairs):
        block = swap_operator(first, second) if bit == "1" else identity((first, second))
        operator = block if operator is None else tensor_product(operator, block)
    if order is not None:
        operator = permute_systems(operator, order)
    return CommutantBasisElement(bits=bits, operator=operator)


def commutant_gram(dims: Sequence[int]) -> np.ndarray:
    """K[b, a] = Tr[B_b B_a] = |A_[k]|·⊗ᵢ [[dᵢ, 1], [1, dᵢ]]."""
    gram = np.ones((1, 1))
    for dim in dims:
        gram = np.kron(gram, np.array([[dim, 1.0], [1.0, dim]]))
    return math.prod(dims) * gram


def commutant_gram_inverse(dims: Sequence[int]) -> np.ndarray:
    """K⁻¹ = ⊗ᵢ [[dᵢ, −1], [−1, dᵢ]] / (|A_[k]|·∏(dᵢ² − 1))."""
    if any(dim < 2 for dim in dims):
        raise OperatorError("sender-dimension", f"every sender needs dim >= 2, got {list(dims)}")
    inverse = np.ones((1, 1))
    for dim in dims:
        inverse = np.kron(inverse, np.array([[dim, -1.0], [-1.0, dim]]))
    return inverse / (math.prod(dims) * math.prod(dim * dim - 1 for dim in dims))


def twirl_moments(
    m: MultipartiteOperator,
    pairs: Sequence[Pair] | None = None,
    *,
    diagnostics: Counter[str] | None = None,
) -> dict[str, float]:
    """m_b = Tr[(⊗F^{bᵢ}) M] for every bit string b.

    Only the real part is kept. Moments with an imaginary part above tolerance
    are counted as ``nonHermitianResiduals``.
    """
    pairs = resolve_pairs(m, pairs)
    scale = max(1.0, float(np.max(np.abs(m.entries), initial=0.0))) * m.side
    moments = {}
    for bits in bit_strings(len(pairs)):
        element = basis_element(bits, pairs, m.names).operator.entries
        value = complex(np.sum(element * m.entries.T))
        if diagnostics is not None and abs(value.imag) > ATOL * scale:
            diagnostics["nonHermitianResiduals"] += 1
        moments[bits] = value.real
    return moments


def _reconstruct(
    alphas: Mapping[str, float], pairs: Sequence[Pair], order: Sequence[str]
) -> MultipartiteOperator:
    systems = tuple(system for pair in pairs for system in pair)
    side = math.prod(system.dim for system in systems)
    total = np.zeros((side, side), dtype=complex)
    for bits, alpha in alphas.items():
        if alpha:
            total += alpha * basis_element(bits, pairs).operator.entries
    return permute_systems(MultipartiteOperator(systems, total), order)


def twirl2_single(m: MultipartiteOperator) -> TwirlResult:
    """αI + βF from Tr M = α|A|² + β|A| and Tr FM = α|A| + β|A|²."""
    pairs = resolve_pairs(m)
    if len(pairs) != 1:
        raise OperatorError("dimension-mismatch", "single twirl needs exactly one pair")
    moments = twirl_moments(m, pairs)
    d = pairs[0][0].dim
    if d == 1:
        alphas = {"0": moments["0"], "1": 0.0}
    else:
        denominator = d * (d * d - 1)
        alphas = {
            "0": (d * moments["0"] - moments["1"]) / denominator,
            "1": (d * moments["1"] - moments["0"]) / denominator,
        }
    return _result(alphas, moments, pairs, m.names)


def _result(
    alphas: dict[str, float],
    moments: dict[str, float],
    pairs: Sequence[Pair],
    order: Sequence[str],
) -> TwirlResult:
    dims = tuple(first.dim for first, _ in pairs)
    keys = bit_strings(len(pairs))
    residual = commutant_gram(dims) @ np.array([alphas[bits] for bits in keys]) - np.array(
        [moments[bits] for bits in keys]
    )
    return TwirlResult(
        alphas=alphas,
        moments=moments,
        reconstructed=_reconstruct(alphas, pairs, order),
        dims=dims,
        gram_residual=float(np.max(np.abs(residual))),
    )


def twirl2_tensor(
    m: MultipartiteOperator,
    dims: Sequence[int] | None = None,
    *,
    pairs: Sequence[tuple[SystemRef, SystemRef]] | None = None,
    diagnostics: Counter[str] | None = None,
) -> TwirlResult:
    """Exact twirl of M by ⊗ᵢ Uᵢ⊗Uᵢ with independent Haar Uᵢ.

    Senders of dimension 1 are dropped from the K system; their bit stays 0 in
    every nonzero coefficient.
    """
    pairs = resolve_pairs(m, pairs)
    _check_dims(pairs, dims)
    moments = twirl_moments(m, pairs, diagnostics=diagnostics)
    active = [index for index, (first, _) in enumerate(pairs) if first.dim > 1]
    alphas = {bits: 0.0 for bits in bit_strings(len(pairs))}
    if active:
        inverse = commutant_gram_inverse([pairs[index][0].dim for index in active])
        reduced_moments = []
        for reduced in bit_strings(len(active)):
            bits = ["0"] * len(pairs)
            for index, bit in zip(active, reduced):
                bits[index] = bit
            reduced_moments.append(moments["".join(bits)])
        solved = inverse @ np.array(reduced_moments)
        for reduced, alpha in zip(bit_strings(len(active)), solved):
            bits = ["0"] * len(pairs)
            for index, bit in zip(active, reduced):
                bits[index] = bit
            alphas["".join(bits)] = float(alpha)
    else:
        alphas["0" * len(pairs)] = moments["0" * len(pairs)]
    return _result(alphas, moments, pairs, m.names)


def monte_carlo_twirl(
    m: MultipartiteOperator,
    dims: Sequence[int] | None = None,
    samples: int = 1000,
    seed: int = 0,
    *,
    pairs: Sequence[tuple[SystemRef, SystemRef]] | None = None,
    max_workers: int | None = None,
    diagnostics: Counter[str] | None = None,
) -> MultipartiteOperator:
    """(1/N) Σ (⊗ᵢ Uᵢ⊗Uᵢ) M (⊗ᵢ Uᵢ⊗Uᵢ)† over seeded Haar samples."""
    pairs = resolve_pairs(m, pairs)
    _check_dims(pairs, dims)

    def draw(rng: np.random.Generator) -> np.ndarray:
        local = {}
        for first, second in pairs:
            unitary = haar_unitary(first.dim, rng)
            local[first.name] = unitary
            local[second.name] = unitary
        return conjugate_local(m, local).entries

    total, run = sum_samples(draw, samples, seed, max_workers=max_workers)
    if diagnostics is not None:
        diagnostics.update(run)
    return MultipartiteOperator(m.systems, total / samples)


def commutant_residual(
    x: MultipartiteOperator,
    pairs: Sequence[tuple[SystemRef, SystemRef]] | None = None,
    *,
    trials: int = 50,
    seed: SeedLike = None,
) -> float:
    """Largest ‖(V⊗V) X (V⊗V)† − X‖₂ over random per-pair unitaries V."""
    pairs = resolve_pairs(x, pairs)
    rng = as_generator(seed)
    worst = 0.0
    for _ in range(trials):
        local = {}
        for first, second in pairs:
            unitary = haar_unitary(first.dim, rng)
            local[first.name] = unitary
            local[second.name] = unitary
        moved = conjugate_local(x, local)
        worst = max(worst, float(np.linalg.norm(moved.entries - x.entries)))
    return worst


def doubled_adjoint_swap(ch: QuantumChannel, suffix: str = "'") -> MultipartiteOperator:
    """𝒯†⊗²(F^{EE'}) on the interleaved inputs (A1, A1', A2, A2', ...)."""
    mapping = {
        name: f"{name}{suffix}" for name in set(ch.input_names).union(ch.output_names)
    }
    doubled = tensor_channels(ch, rename_channel(ch, mapping))
    swap = None
    for output in ch.output_systems:
        block = swap_operator(output, output.prime(suffix))
        swap = block if swap is None else tensor_product(swap, block)
    pulled = adjoint_apply(doubled, swap)
    order = [name for system in ch.input_systems for name in (system.name, mapping[system.name])]
    return permute_systems(pulled, order)


def choi_norms(ch: QuantumChannel) -> dict[str, float]:
    """‖ω^{Â^b E}‖₂² of the Choi state for every sender subset b."""
    omega = choi(ch)
    outputs = list(ch.output_systems)
    norms = {}
    for bits in bit_strings(len(ch.input_systems)):
        chosen = [mirror(sender) for sender, bit in zip(ch.input_systems, bits) if bit == "1"]
        norms[bits] = schatten_norm(omega.marginal(chosen + outputs), 2) ** 2
    return norms


def _two_sender_bounds(dims: Sequence[int], norms: Mapping[str, float]) -> dict[str, float]:
    large = max(dims) ** 2
    factor = large / (large - 1)
    return {bits: factor * norms[bits] for bits in bit_strings(len(dims))}


def _k_sender_bounds(dims: Sequence[int], norms: Mapping[str, float]) -> dict[str, float]:
    k = len(dims)
    smallest = int(np.argmin(dims))
    others = [index for index in range(k) if index != smallest]
    other_gaps = math.prod(dims[i] ** 2 - 1 for i in others)
    all_gaps = math.prod(dim * dim - 1 for dim in dims)
    zero = "0" * k
    bound_zero = norms[zero] * math.prod(dims[i] ** 2 for i in others) / other_gaps
    for bits in bit_strings(k):
        if bits == zero or bits[smallest] == "1":
            continue
        weight = math.prod(dims[i] ** (2 - int(bits[i])) for i in others)
        bound_zero += norms[bits] * weight / other_gaps
    bounds = {zero: bound_zero}
    scale = math.prod(dims) ** 2 / all_gaps * 2**k
    for bits in bit_strings(k):
        if bits != zero:
            bounds[bits] = scale * norms[bits]
    return bounds


def alpha_bounds(dims: Sequence[int], choi_norms: Mapping[str, float]) -> dict[str, float]:
    """Upper bounds on the twirl coefficients of 𝒯̃†⊗²(F^{EE'}).

    Two senders use the tighter two-sender constants; any other count uses the
    k-sender ones, with the smallest sender singled out in the α₀ bound.
    """
    if any(dim < 2 for dim in dims):
        raise OperatorError("sender-dimension", f"every sender needs dim >= 2, got {list(dims)}")
    missing = set(bit_strings(len(dims))).difference(choi_norms)
    if missing:
        raise OperatorError("bad-bits", f"missing Choi norms for {sorted(missing)}")
    if len(dims) == 2:
        return _two_sender_bounds(dims, choi_norms)
    return _k_sender_bounds(dims, choi_norms)


def alpha_bounds_check(
    tw: TwirlResult, choi_norms: Mapping[str, float], *, atol: float = 1e-9
) -> AlphaBoundsReport:
    bounds = alpha_bounds(tw.dims, choi_norms)
    slack = {bits: bounds[bits] - tw.alphas[bits] for bits in bounds}
    violations = sorted(bits for bits, value in slack.items() if value < -atol)
    return AlphaBoundsReport(bounds=bounds, slack=slack, violations=violations)
