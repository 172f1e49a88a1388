"""One-shot entropies in bits.

The conditional 2-entropies weight the joint operator by the (possibly
truncated) conditioning marginal. An empty conditioning set conditions on the
trivial system, which gives the collision entropy.
"""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np

from .tensor import (
    MultipartiteOperator,
    OperatorError,
    SystemRef,
    TruncationError,
    _names,
    embed,
    partial_trace,
    permute_systems,
    psd_power,
    pseudo_inverse,
    support_projector,
    truncation,
)


@dataclass(frozen=True)
class EntropyReport:
    value: float
    delta: float
    truncated_mass: float
    support_rank: int

    def to_payload(self) -> dict[str, float | int]:
        return {
            "delta": self.delta,
            "supportRank": self.support_rank,
            "truncatedMass": self.truncated_mass,
            "value": self.value,
        }


def _conditioning(rho: MultipartiteOperator, cond: Iterable[SystemRef]) -> list[str]:
    names = _names(cond)
    unknown = set(names).difference(rho.names)
    if unknown:
        raise OperatorError("unknown-system", f"{sorted(unknown)} not in {list(rho.names)}")
    if set(names) == set(rho.names):
        raise OperatorError(
            "bad-conditioning", "conditioning on every system leaves nothing to measure"
        )
    return [name for name in rho.names if name in names]


def _weighted_collision(rho: MultipartiteOperator, quarter: MultipartiteOperator) -> float:
    """−log₂ ‖W ρ W‖₂² for W the embedded quarter-power weight."""
    weight = embed(quarter, rho.systems).entries
    weighted = weight @ rho.entries @ weight
    overlap = float(np.real(np.vdot(weighted, weighted)))
    if overlap <= 0.0:
        raise TruncationError("the weighted operator vanishes")
    return -math.log2(overlap)


def tilde_h2_cond(
    rho: MultipartiteOperator, cond: Iterable[SystemRef], delta: float
) -> EntropyReport:
    """−log₂ Tr[ρ (I⊗ρ_δ^{−1/2}) ρ (I⊗ρ_δ^{−1/2})] with ρ_δ the truncated marginal."""
    names = _conditioning(rho, cond)
    if not rho.is_psd:
        raise OperatorError("not-psd", f"operator on {list(rho.names)} is not PSD")
    marginal = partial_trace(rho, names)
    cut = truncation(marginal, delta)
    if cut.rank == 0:
        raise TruncationError(
            f"delta={cut.delta!r} removes the whole spectrum of the {names or 'trivial'} marginal"
        )
    value = _weighted_collision(rho, pseudo_inverse(cut.kept, -0.25))
    return EntropyReport(
        value=value,
        delta=cut.delta,
        truncated_mass=cut.removed_mass,
        support_rank=cut.rank,
    )


def collision_entropy(rho: MultipartiteOperator) -> float:
    """−log₂(Tr ρ² / Tr ρ); δ plays no role without a conditioning system."""
    return tilde_h2_cond(rho, (), 0.0).value


def tilde_hmax_delta(rho: MultipartiteOperator, delta: float) -> float:
    cut = truncation(rho, delta)
    if cut.rank == 0:
        raise TruncationError(f"delta={cut.delta!r} removes the whole spectrum")
    values = cut.kept.eigenvalues
    cutoff = cut.kept.side * np.finfo(float).eps * float(np.max(np.abs(values)))
    return -math.log2(float(np.min(values[values > cutoff])))


def hmax(rho: MultipartiteOperator) -> float:
    """2·log₂ Tr√ρ, the max entropy without smoothing."""
    root_trace = float(np.real(psd_power(rho, 0.5).trace))
    if root_trace <= 0.0:
        raise TruncationError("max entropy of the zero operator")
    return 2.0 * math.log2(root_trace)


def h2_cond_fixed(
    rho: MultipartiteOperator,
    cond: Iterable[SystemRef],
    weight: MultipartiteOperator,
    *,
    require_support: bool = True,
) -> float:
    """−2·log₂ ‖(weight⊗I)^{−1/4} ρ (weight⊗I)^{−1/4}‖₂ for a fixed weight.

    With ``require_support`` the weight's support must contain the support of
    the conditioning marginal; truncated weights pass ``require_support=False``.
    """
    names = _conditioning(rho, cond)
    if sorted(weight.names) != sorted(names):
        raise OperatorError(
            "unknown-system", f"weight on {list(weight.names)}, conditioning on {names}"
        )
    weight = permute_systems(weight, names)
    if require_support:
        marginal = partial_trace(rho, names).entries
        projector = support_projector(weight).entries
        inside = projector @ marginal @ projector
        scale = max(1.0, float(np.max(np.abs(marginal))))
        if not np.allclose(inside, marginal, rtol=0.0, atol=1e-9 * scale):
            raise OperatorError(
                "support-mismatch", "weight support misses part of the marginal"
            )
    return _weighted_collision(rho, pseudo_inverse(weight, -0.25))


def smooth_tilde_h2_cond(
    rho: MultipartiteOperator, cond: Iterable[SystemRef], delta: float, epsilon: float
) -> EntropyReport:
    raise NotImplementedError("epsilon-smoothed entropies are not implemented")
