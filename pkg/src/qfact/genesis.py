"""Generation operations and coding-measurement successions.

A generation recipe produces one specimen per realization; measuring the
specimen codes its registered marks into one eigenvalue and destroys it,
so every coded outcome costs a whole generate-then-measure succession.
Batched runners reproduce the per-trial behaviour with counter-based
randomness so results are independent of worker scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod

import numpy as np

from . import finprob
from .errors import (
    DestroyedSpecimenError,
    DimensionMismatchError,
    GuidedCodingUnavailableError,
)
from .hilbert import (
    HamiltonianSpec,
    ObservableSpec,
    OracleState,
    born_law,
    compose_superposition,
    evolve,
    sample_outcomes_from_uniforms,
)
from .seeding import counter_uniforms
from .validation import check_rng


@dataclass(frozen=True)
class GenerationOp:
    """Base recipe; concrete kinds below.  ``attachment`` optionally points
    to a closed-form wave scenario used for guided coding (duck-typed: it
    must provide sample_position(rng) and momentum_at(r, t))."""

    id: str
    attachment: object | None = field(default=None, kw_only=True)


@dataclass(frozen=True)
class Simple(GenerationOp):
    state: OracleState = None

    def __post_init__(self):
        if self.state is None:
            raise ValueError("Simple recipe needs a state")


@dataclass(frozen=True)
class Composed(GenerationOp):
    weights: tuple[complex, ...] = ()
    components: tuple[GenerationOp, ...] = ()

    def __post_init__(self):
        if len(self.weights) != len(self.components) or not self.components:
            raise ValueError("Composed recipe needs one weight per component")


@dataclass(frozen=True)
class Evolved(GenerationOp):
    base: GenerationOp = None
    hamiltonian: HamiltonianSpec = None
    dt: float = 0.0

    def __post_init__(self):
        if self.base is None or self.hamiltonian is None:
            raise ValueError("Evolved recipe needs a base recipe and a Hamiltonian")
        if self.dt < 0:
            raise ValueError("dt must be non-negative")


@dataclass(frozen=True)
class MultiSystem(GenerationOp):
    joint_state: OracleState = None
    factor_dims: tuple[int, ...] = ()
    factor_labels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.joint_state is None or not self.factor_dims:
            raise ValueError("MultiSystem recipe needs a joint state and factor dims")
        if prod(self.factor_dims) != self.joint_state.dim:
            raise DimensionMismatchError(
                "product of factor dims must equal the joint state dimension")
        if len(self.factor_labels) != len(self.factor_dims):
            raise ValueError("need one label per factor")


def resolve_state(g: GenerationOp) -> OracleState:
    """Hidden state the recipe prepares (deterministic per recipe)."""
    if isinstance(g, Simple):
        return g.state
    if isinstance(g, Composed):
        return compose_superposition(list(g.weights),
                                     [resolve_state(c) for c in g.components])
    if isinstance(g, Evolved):
        return evolve(resolve_state(g.base), g.hamiltonian, g.dt)
    if isinstance(g, MultiSystem):
        return g.joint_state
    raise TypeError(f"unknown generation kind {type(g)!r}")


@dataclass
class Specimen:
    """One individual realization of a recipe.  Measurement operations
    require ``alive`` and clear it."""

    hidden_state: OracleState
    dbb_attachment: object | None = None
    corpuscle_position: np.ndarray | None = None
    alive: bool = True

    def _consume(self):
        if not self.alive:
            raise DestroyedSpecimenError(
                "specimen already measured; realize a fresh succession")
        self.alive = False


@dataclass(frozen=True)
class CodedOutcome:
    observable: str
    eigen_index: int
    eigenvalue: float
    region_index: int
    trial_id: int = 0

    def __post_init__(self):
        if self.region_index != self.eigen_index:
            raise ValueError("coding map is the identity on indices")

    @property
    def label(self) -> str:
        return f"{self.observable}:{self.eigen_index}"


def generate(g: GenerationOp, rng) -> Specimen:
    """Realize the recipe once."""
    state = resolve_state(g)
    position = None
    if g.attachment is not None:
        position = g.attachment.sample_position(check_rng(rng))
    return Specimen(hidden_state=state, dbb_attachment=g.attachment,
                    corpuscle_position=position)


def mes_coding_nc(s: Specimen, obs: ObservableSpec, rng, trial_id: int = 0
                  ) -> CodedOutcome:
    """Non-composed coding measurement: marks registered in region j code
    the eigenvalue with the same index."""
    s._consume()
    law = born_law(s.hidden_state, obs)
    u = check_rng(rng).random()
    j = int(sample_outcomes_from_uniforms(law, np.array([u]))[0])
    return CodedOutcome(observable=obs.name, eigen_index=j,
                        eigenvalue=float(obs.eigenvalues[j]),
                        region_index=j, trial_id=trial_id)


def mes_coding_guided(s: Specimen, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Guided coding: read position and guided momentum off the trace."""
    if s.dbb_attachment is None:
        raise GuidedCodingUnavailableError(
            "guided coding needs a wave attachment on the specimen")
    s._consume()
    r = np.asarray(s.corpuscle_position, dtype=float)
    p = np.asarray(s.dbb_attachment.momentum_at(r, t), dtype=float)
    return r, p


def mes_complete(s: Specimen, obs_list, rng, trial_id: int = 0
                 ) -> list[CodedOutcome]:
    """Complete measurement on a multi-system specimen: one group of marks
    per factor, sampled jointly from the joint Born law."""
    s._consume()
    dims = [o.dim for o in obs_list]
    if prod(dims) != s.hidden_state.dim:
        raise DimensionMismatchError(
            "factor observables do not cover the joint dimension")
    basis = obs_list[0].eigenbasis
    for o in obs_list[1:]:
        basis = np.kron(basis, o.eigenbasis)
    joint_law = np.abs(basis.conj().T @ s.hidden_state.amplitudes) ** 2
    u = check_rng(rng).random()
    flat = int(sample_outcomes_from_uniforms(joint_law, np.array([u]))[0])
    parts = np.unravel_index(flat, dims)
    return [CodedOutcome(observable=o.name, eigen_index=int(j),
                         eigenvalue=float(o.eigenvalues[int(j)]),
                         region_index=int(j), trial_id=trial_id)
            for o, j in zip(obs_list, parts)]


def time_of_flight(x_n, t_n: float, t0: float, m: float, origin=None
                   ) -> np.ndarray:
    """Momentum from an impact point and its flight time: m * d / (t_n - t0)."""
    if t_n <= t0:
        raise ValueError("flight time must be positive")
    if m <= 0:
        raise ValueError("mass must be positive")
    x = np.asarray(x_n, dtype=float)
    o = np.zeros_like(x) if origin is None else np.asarray(origin, dtype=float)
    return m * (x - o) / (t_n - t0)


def run_successions(g: GenerationOp, obs: ObservableSpec, n: int,
                    eps: float, delta: float, n0: int, rng,
                    trial_offset: int = 0) -> finprob.FactualLaw:
    """Accumulate n independent generate-then-measure successions.

    The hidden state is fixed by the recipe, so the batch draws n outcomes
    from its Born law in one vectorized pass, which reproduces the per-trial
    succession exactly in distribution.  Passing an integer seed uses
    counter-based per-trial uniforms keyed by (seed, trial_offset + i):
    partial batches built from disjoint trial ranges merge into the same law
    regardless of scheduling.
    """
    if n < 1:
        raise ValueError("need at least one succession")
    law_vec = born_law(resolve_state(g), obs)
    if isinstance(rng, (int, np.integer)):
        uniforms = counter_uniforms(int(rng),
                                    np.arange(trial_offset, trial_offset + n))
    else:
        uniforms = check_rng(rng).random(n)
    idx = sample_outcomes_from_uniforms(law_vec, uniforms)
    empty = finprob.FactualLaw.empty(obs.labels(), eps, delta, n0)
    return finprob.accumulate_indices(empty, idx)


def run_complete_successions(g: MultiSystem, obs_list, n: int,
                             eps: float, delta: float, n0: int, rng,
                             trial_offset: int = 0
                             ) -> tuple[finprob.FactualLaw, list[finprob.FactualLaw]]:
    """Batched complete measurements on a multi-system recipe.

    Returns the joint law over flattened outcome tuples plus one marginal
    law per factor, all built from the same succession stream.
    """
    if n < 1:
        raise ValueError("need at least one succession")
    dims = [o.dim for o in obs_list]
    state = resolve_state(g)
    if prod(dims) != state.dim:
        raise DimensionMismatchError(
            "factor observables do not cover the joint dimension")
    basis = obs_list[0].eigenbasis
    for o in obs_list[1:]:
        basis = np.kron(basis, o.eigenbasis)
    joint_law = np.abs(basis.conj().T @ state.amplitudes) ** 2
    if isinstance(rng, (int, np.integer)):
        uniforms = counter_uniforms(int(rng),
                                    np.arange(trial_offset, trial_offset + n))
    else:
        uniforms = check_rng(rng).random(n)
    flat = sample_outcomes_from_uniforms(joint_law, uniforms)
    parts = np.unravel_index(flat, dims)

    joint_name = "*".join(o.name for o in obs_list)
    joint_labels = [f"{joint_name}:{k}" for k in range(prod(dims))]
    joint = finprob.accumulate_indices(
        finprob.FactualLaw.empty(joint_labels, eps, delta, n0), flat)
    marginals = [
        finprob.accumulate_indices(
            finprob.FactualLaw.empty(o.labels(), eps, delta, n0), parts[i])
        for i, o in enumerate(obs_list)
    ]
    return joint, marginals
