"""Both sides of the tensor-product decoupling inequality.

The left side is a Monte-Carlo average of ‖𝒯((⊗Uᵢ)·ρ) − ω^E⊗ρ^R‖₁ over
independent Haar unitaries on the senders. The right sides are closed-form
bounds assembled from the 2-norms of the weighted ("tilde") marginals.
"""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any, NamedTuple

import numpy as np

from .channels import (
    ChoiState,
    QuantumChannel,
    apply,
    choi,
    mirror,
    postcompose,
    projector_compression,
)
from .entropy import tilde_h2_cond
from .parallel import map_samples
from .tensor import (
    ATOL,
    MultipartiteOperator,
    OperatorError,
    SystemLabel,
    TruncationError,
    _check_delta,
    conjugate_local,
    embed,
    haar_unitary,
    partial_trace,
    pseudo_inverse,
    schatten_norm,
    tensor_product,
    truncation,
)
from .twirl import bit_strings

# ‖X − Y‖₁ ≤ 2 for density operators X and Y.
TRACE_DISTANCE_CAP = 2.0


@dataclass(frozen=True, eq=False)
class DecouplingExperiment:
    channel: QuantumChannel
    input: MultipartiteOperator
    delta: float = 0.0
    samples: int = 1000
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.input.is_density:
            raise OperatorError("not-density", "the input must be a density operator")
        for sender in self.channel.input_systems:
            held = self.input.system(sender.name)
            if held.dim != sender.dim:
                raise OperatorError(
                    "dimension-mismatch", f"channel expects {sender}, state holds {held}"
                )
        clash = set(self.channel.output_names).intersection(
            system.name for system in self.reference
        )
        if clash:
            raise OperatorError("system-clash", f"outputs reuse reference names {sorted(clash)}")
        object.__setattr__(self, "delta", _check_delta(self.delta))
        if self.samples < 1:
            raise OperatorError("bad-samples", f"samples must be positive, got {self.samples}")

    @property
    def senders(self) -> tuple[SystemLabel, ...]:
        return self.channel.input_systems

    @property
    def reference(self) -> tuple[SystemLabel, ...]:
        names = set(self.channel.input_names)
        return tuple(system for system in self.input.systems if system.name not in names)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(system.dim for system in self.senders)


class LhsEstimate(NamedTuple):
    mean: float
    stderr: float


@dataclass(frozen=True, eq=False)
class TildeTriple:
    sigma_E: MultipartiteOperator
    zeta_R: MultipartiteOperator
    tilde_channel: QuantumChannel
    tilde_rho: MultipartiteOperator
    tilde_omega: ChoiState


@dataclass(frozen=True)
class TildeNorms:
    """‖ρ̃^{A^b R}‖₂² and ‖ω̃^{Â^b E}‖₂² keyed by sender bit strings."""

    rho: dict[str, float]
    omega: dict[str, float]

    def to_payload(self) -> dict[str, dict[str, float]]:
        return {"omega": dict(sorted(self.omega.items())), "rho": dict(sorted(self.rho.items()))}


@dataclass(frozen=True)
class KSenderBound:
    squared: float
    one_norm: float


def decoupling_target(exp: DecouplingExperiment) -> MultipartiteOperator:
    """ω^E ⊗ ρ^R with ω^E the output marginal of the Choi state."""
    omega_e = choi(exp.channel).output_marginal()
    if not exp.reference:
        return omega_e
    return tensor_product(omega_e, partial_trace(exp.input, exp.reference))


def lhs_estimate(
    exp: DecouplingExperiment,
    *,
    max_workers: int | None = None,
    diagnostics: Counter[str] | None = None,
) -> LhsEstimate:
    if exp.samples < 2:
        raise OperatorError("bad-samples", "a standard error needs at least two samples")
    target = decoupling_target(exp)

    def draw(rng: np.random.Generator) -> float:
        local = {sender.name: haar_unitary(sender.dim, rng) for sender in exp.senders}
        output = apply(exp.channel, conjugate_local(exp.input, local))
        return schatten_norm(output - target, 1)

    values, run = map_samples(draw, exp.samples, exp.seed, max_workers=max_workers)
    if diagnostics is not None:
        diagnostics.update(run)
    values = np.array(values)
    return LhsEstimate(
        mean=float(np.mean(values)),
        stderr=float(np.std(values, ddof=1) / math.sqrt(values.size)),
    )


def tilde_objects(exp: DecouplingExperiment) -> TildeTriple:
    omega_e = choi(exp.channel).output_marginal()
    sigma = truncation(omega_e, exp.delta)
    if sigma.rank == 0:
        raise TruncationError(f"delta={exp.delta!r} removes the whole spectrum of omega^E")
    zeta = truncation(partial_trace(exp.input, exp.reference), exp.delta)
    if zeta.rank == 0:
        raise TruncationError(f"delta={exp.delta!r} removes the whole spectrum of rho^R")

    tilde_channel = postcompose(exp.channel, pseudo_inverse(sigma.kept, -0.25))
    weight = embed(pseudo_inverse(zeta.kept, -0.25), exp.input.systems).entries
    tilde_rho = MultipartiteOperator(
        exp.input.systems, weight @ exp.input.entries @ weight
    )
    return TildeTriple(
        sigma_E=sigma.kept,
        zeta_R=zeta.kept,
        tilde_channel=tilde_channel,
        tilde_rho=tilde_rho,
        tilde_omega=choi(tilde_channel),
    )


def _squared_norm(x: MultipartiteOperator) -> float:
    return schatten_norm(x, 2) ** 2


def tilde_norms(exp: DecouplingExperiment, triple: TildeTriple | None = None) -> TildeNorms:
    triple = triple or tilde_objects(exp)
    rho: dict[str, float] = {}
    omega: dict[str, float] = {}
    for bits in bit_strings(len(exp.senders)):
        chosen = [sender for sender, bit in zip(exp.senders, bits) if bit == "1"]
        rho[bits] = _squared_norm(
            partial_trace(triple.tilde_rho, chosen + list(exp.reference))
        )
        omega[bits] = _squared_norm(
            triple.tilde_omega.marginal(
                [mirror(sender) for sender in chosen] + list(exp.channel.output_systems)
            )
        )
    return TildeNorms(rho=rho, omega=omega)


def _require_senders(exp: DecouplingExperiment, count: int | None = None) -> None:
    if count is not None and len(exp.senders) != count:
        raise OperatorError(
            "sender-count", f"this bound needs {count} senders, got {len(exp.senders)}"
        )
    if any(dim < 2 for dim in exp.dims):
        raise OperatorError("sender-dimension", f"every sender needs dim >= 2, got {list(exp.dims)}")


def larger_sender(exp: DecouplingExperiment) -> SystemLabel:
    """The sender playing A₂ in the two-sender bound; ties keep the second one."""
    first, second = exp.senders
    return first if first.dim > second.dim else second


def rhs_two_sender(
    exp: DecouplingExperiment,
    *,
    include_residual: bool = False,
    norms: TildeNorms | None = None,
) -> float:
    """(δ + |A₂|²/(|A₂|²−1)·Σ_{b≠0} ‖ρ̃^{A^b R}‖₂²‖ω̃^{Â^b E}‖₂²)^{1/2}.

    ``include_residual`` adds the ‖ω̃^E‖₂²‖ρ̃^R‖₂²/(|A₂|²−1) term that the
    statement folds into δ.
    """
    _require_senders(exp, 2)
    norms = norms or tilde_norms(exp)
    large = larger_sender(exp).dim ** 2
    terms = sum(norms.rho[bits] * norms.omega[bits] for bits in ("10", "01", "11"))
    squared = exp.delta + large / (large - 1) * terms
    if include_residual:
        squared += norms.rho["00"] * norms.omega["00"] / (large - 1)
    return math.sqrt(squared)


def rhs_entropic(exp: DecouplingExperiment) -> float:
    """δ + 2·Σ_{b≠0} 2^{−H̃(A^b|R)ρ − H̃(Â^b|E)ω}, every entropy truncated at δ."""
    _require_senders(exp)
    omega = choi(exp.channel)
    outputs = list(exp.channel.output_systems)
    reference = list(exp.reference)
    total = 0.0
    for bits in bit_strings(len(exp.senders))[1:]:
        chosen = [sender for sender, bit in zip(exp.senders, bits) if bit == "1"]
        rho_part = partial_trace(exp.input, chosen + reference)
        omega_part = omega.marginal([mirror(sender) for sender in chosen] + outputs)
        exponent = (
            tilde_h2_cond(rho_part, reference, exp.delta).value
            + tilde_h2_cond(omega_part, outputs, exp.delta).value
        )
        total += 2.0 ** (-exponent)
    return exp.delta + 2.0 * total


def rhs_k_sender(exp: DecouplingExperiment, *, norms: TildeNorms | None = None) -> KSenderBound:
    """k-sender bound on the squared deviation, and its 1-norm form √(δ + squared).

    The smallest sender is singled out in the residual coefficient. The δ under
    the root pays for the truncation of the tilde weights, as in the two-sender
    bound; at δ = 0 the 1-norm form is exactly √squared.
    """
    _require_senders(exp)
    norms = norms or tilde_norms(exp)
    dims = exp.dims
    k = len(dims)
    smallest = int(np.argmin(dims))
    others = [index for index in range(k) if index != smallest]
    residual_factor = math.prod(dims[i] ** 2 for i in others) / math.prod(
        dims[i] ** 2 - 1 for i in others
    )
    full_factor = math.prod(dim * dim for dim in dims) / math.prod(
        dim * dim - 1 for dim in dims
    )
    zero = "0" * k
    squared = (residual_factor - 1.0) * norms.omega[zero] * norms.rho[zero]
    for bits in bit_strings(k)[1:]:
        squared += full_factor * norms.omega[bits] * (
            norms.rho[bits] * 2**k + norms.rho[zero]
        )
    return KSenderBound(squared=squared, one_norm=math.sqrt(exp.delta + squared))


def rhs_buscemi(
    projectors: Sequence[MultipartiteOperator],
    rho: MultipartiteOperator,
    delta: float,
) -> float:
    """(δ + 2·Σ_{b≠0} |E^b|·2^{−H̃(A^b|R)ρ})^{1/2} for projector compressions."""
    delta = _check_delta(delta)
    senders = [projector.systems[0] for projector in projectors]
    ranks = []
    for projector in projectors:
        rank = int(round(float(np.real(projector.trace))))
        if rank < 1:
            raise OperatorError("not-projector", f"projector on {projector.names[0]!r} has rank 0")
        ranks.append(rank)
    names = {sender.name for sender in senders}
    reference = [system for system in rho.systems if system.name not in names]
    total = 0.0
    for bits in bit_strings(len(senders))[1:]:
        chosen = [sender for sender, bit in zip(senders, bits) if bit == "1"]
        size = math.prod(rank for rank, bit in zip(ranks, bits) if bit == "1")
        marginal = partial_trace(rho, chosen + reference)
        total += size * 2.0 ** (-tilde_h2_cond(marginal, reference, delta).value)
    return math.sqrt(delta + 2.0 * total)


def buscemi_experiment(
    projectors: Sequence[MultipartiteOperator],
    rho: MultipartiteOperator,
    delta: float = 0.0,
    samples: int = 1000,
    seed: int = 0,
) -> DecouplingExperiment:
    """Decoupling experiment for the projector compression; its target is π⊗…⊗π⊗ρ^R."""
    return DecouplingExperiment(
        channel=projector_compression(projectors),
        input=rho,
        delta=delta,
        samples=samples,
        seed=seed,
    )


def decoupling_report(
    exp: DecouplingExperiment,
    *,
    max_workers: int | None = None,
) -> dict[str, Any]:
    diagnostics: Counter[str] = Counter()
    lhs = lhs_estimate(exp, max_workers=max_workers, diagnostics=diagnostics)
    triple = tilde_objects(exp)
    norms = tilde_norms(exp, triple)
    report: dict[str, Any] = {
        "delta": exp.delta,
        "dims": list(exp.dims),
        "k": len(exp.senders),
        "lhs_mean": lhs.mean,
        "lhs_stderr": lhs.stderr,
        "per_term_norms": norms.to_payload(),
        "rhs_cor1": None,
        "rhs_thm1": None,
        "rhs_thm1_with_residual": None,
        "rhs_thm3": None,
        "rhs_thm3_squared": None,
        "samples": exp.samples,
        "seed": exp.seed,
        "senders": [sender.name for sender in exp.senders],
        "trace_preserving": exp.channel.tp,
    }
    if all(dim >= 2 for dim in exp.dims):
        bound = rhs_k_sender(exp, norms=norms)
        report["rhs_thm3"] = bound.one_norm
        report["rhs_thm3_squared"] = bound.squared
        report["rhs_cor1"] = rhs_entropic(exp)
        if len(exp.senders) == 2:
            report["larger_sender"] = larger_sender(exp).name
            report["rhs_thm1"] = rhs_two_sender(exp, norms=norms)
            report["rhs_thm1_with_residual"] = rhs_two_sender(
                exp, include_residual=True, norms=norms
            )
    else:
        diagnostics["boundsSkippedSenderDimension"] += 1
    bounds = [
        value
        for value in (report["rhs_thm1_with_residual"], report["rhs_thm3"])
        if value is not None
    ]
    if bounds:
        report["rhs_capped"] = min(min(bounds), TRACE_DISTANCE_CAP)
        limit = report["rhs_capped"] + 3.0 * lhs.stderr + ATOL
        report["within_bound"] = lhs.mean <= limit
        if not report["within_bound"]:
            diagnostics["boundViolations"] += 1
    report["diagnostics"] = {
        key: int(value) for key, value in sorted(diagnostics.items()) if value
    }
    return report
