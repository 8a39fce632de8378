"""State expansion reconstruction from measured frequency laws.

Amplitudes come straight from square roots of frequencies.  Phases are the
unknowns: they are fit by multi-start gradient descent on the consistency
residual

    R(alpha) = sum_B sum_k ( |sum_j tau^B_kj sqrt(pi_A(j)) e^{i alpha_j}|^2
                             - pi_B(k) )^2

with the first phase gauged to zero.  A law set that admits no phase
assignment (residual above tolerance after every restart) is rejected as
not representable by any single state vector.

``StateReconstructor`` wraps the procedure in a scikit-learn style
fit/predict estimator so it composes with the wider ecosystem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import finprob
from .errors import (
    DimensionMismatchError,
    EmptyLawError,
    InconsistentLawsError,
    UnlinkedObservableError,
)
from .hilbert import TransformMatrix, dirac_transform

AMPLITUDE_SUM_TOL = 1e-8
ZERO_AMP = 1e-12


@dataclass(frozen=True)
class RetrievalConfig:
    restarts: int = 32
    tol: float = 1e-10          # accept the fit when R falls at or below this
    stop_tol: float = 1e-20     # descend no further once R is this small
    max_iter: int = 500
    seed: int = 0

    @classmethod
    def for_sampled_laws(cls, n_trials: int, n_terms: int, **kw) -> "RetrievalConfig":
        """Tolerance scaled to sampling noise: ten times the squared binomial
        sigma (at worst 1/(2 sqrt n)) summed over all residual terms."""
        tol = 10.0 * n_terms * 0.25 / n_trials
        return cls(tol=tol, stop_tol=tol * 1e-6, **kw)


@dataclass
class RetrievalReport:
    residual: float
    restarts_used: int
    converged: bool
    ambiguity_flag: str  # unique | conjugate-pair | underdetermined
    # second member of the ambiguity set, when one exists (the conjugate
    # solution generalizes to a reflection when the transform is complex)
    alternate_phases: np.ndarray | None = None


@dataclass
class ExpansionSet:
    """Per-observable amplitude and phase arrays of one reconstructed state.

    Gauge: the first phase of the reference observable is 0.  Phases of
    zero-amplitude components are 0 by convention.
    """

    reference_observable: str
    amplitudes: dict[str, np.ndarray]
    phases: dict[str, np.ndarray]

    def __post_init__(self):
        for name, amp in self.amplitudes.items():
            total = float(np.sum(np.asarray(amp) ** 2))
            if abs(total - 1.0) > AMPLITUDE_SUM_TOL:
                raise ValueError(
                    f"amplitudes for {name!r} must have unit square sum, got {total!r}")

    def coefficients(self, name: str | None = None) -> np.ndarray:
        name = self.reference_observable if name is None else name
        return self.amplitudes[name] * np.exp(1j * self.phases[name])

    def to_json_dict(self) -> dict:
        return {
            "reference_observable": self.reference_observable,
            "amplitudes": {k: list(map(float, v)) for k, v in self.amplitudes.items()},
            "phases": {k: list(map(float, v)) for k, v in self.phases.items()},
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ExpansionSet":
        return cls(doc["reference_observable"],
                   {k: np.asarray(v, dtype=float) for k, v in doc["amplitudes"].items()},
                   {k: np.asarray(v, dtype=float) for k, v in doc["phases"].items()})


def law_vector(law) -> np.ndarray:
    """Frequency vector of a FactualLaw, or a plain probability vector
    passed through (exact laws enter the pipeline as arrays)."""
    if isinstance(law, finprob.FactualLaw):
        return finprob.frequency_vector(law)
    vec = np.asarray(law, dtype=float)
    if vec.ndim != 1 or vec.size == 0:
        raise EmptyLawError("law vector must be a non-empty 1-D array")
    if abs(vec.sum() - 1.0) > 1e-8 or np.any(vec < 0):
        raise ValueError("law vector must be a probability vector")
    return vec


def amplitudes_from_law(law) -> np.ndarray:
    """|c_j| = sqrt(frequency_j), in spectrum order."""
    return np.sqrt(law_vector(law))


def _wrap_phase(alpha: np.ndarray) -> np.ndarray:
    """Map phases into (-pi, pi]."""
    wrapped = np.mod(alpha + np.pi, 2 * np.pi) - np.pi
    wrapped[np.isclose(wrapped, -np.pi)] = np.pi
    return wrapped


def _residual_and_grad(alpha: np.ndarray, amp: np.ndarray, partners,
                       anchor: int = 0):
    """Batched R and dR/dalpha for alpha of shape (m, d).  The anchor
    component's phase is held fixed (gauge freedom)."""
    c = amp * np.exp(1j * alpha)
    r_total = np.zeros(alpha.shape[0])
    grad = np.zeros_like(alpha)
    for tau, target in partners:
        d = c @ tau.T
        r = np.abs(d) ** 2 - target
        r_total += np.sum(r ** 2, axis=1)
        grad += -4.0 * np.imag(c * ((r * d.conj()) @ tau))
    grad[:, anchor] = 0.0
    return r_total, grad


def _descend(alpha: np.ndarray, amp: np.ndarray, partners, max_iter: int,
             stop_tol: float, anchor: int = 0):
    """Monotone gradient descent with Armijo backtracking, batched over
    restarts.  Step sizes follow the Barzilai-Borwein secant rule (plain
    doubling as fallback), which keeps the endgame fast on ill-conditioned
    bowls; every accepted step still strictly decreases R."""
    m = alpha.shape[0]
    step = np.full(m, 1.0)
    value, grad = _residual_and_grad(alpha, amp, partners, anchor)
    active = np.ones(m, dtype=bool)
    for _ in range(max_iter):
        gnorm2 = np.sum(grad ** 2, axis=1)
        active &= value > stop_tol
        active &= gnorm2 > 1e-30
        if not active.any():
            break
        accepted = np.zeros(m, dtype=bool)
        taken = np.zeros(m)
        for _bt in range(60):
            trial = np.where(active & ~accepted)[0]
            if trial.size == 0:
                break
            cand = alpha[trial] - step[trial, None] * grad[trial]
            cand_val, _ = _residual_and_grad(cand, amp, partners, anchor)
            ok = cand_val <= value[trial] - 1e-4 * step[trial] * gnorm2[trial]
            idx = trial[ok]
            alpha[idx] = cand[ok]
            value[idx] = cand_val[ok]
            taken[idx] = step[idx]
            accepted[idx] = True
            step[trial[~ok]] *= 0.5
        active &= accepted
        if accepted.any():
            _, new_grad = _residual_and_grad(alpha, amp, partners, anchor)
            # BB1 secant step from s = -t g_old, y = g_new - g_old
            y = new_grad - grad
            sy = -taken * np.sum(grad * y, axis=1)
            ss = taken ** 2 * gnorm2
            with np.errstate(divide="ignore", invalid="ignore"):
                bb = np.where(sy > 0, ss / sy, step * 4.0)
            step = np.where(accepted, np.clip(bb, 1e-8, 1e8), step)
            grad = new_grad
    return alpha, value


def _phase_distance(a: np.ndarray, b: np.ndarray, amp: np.ndarray) -> float:
    """Max circular phase gap over components that carry amplitude."""
    mask = amp > ZERO_AMP
    diff = _wrap_phase(a - b)
    return float(np.max(np.abs(diff[mask]))) if mask.any() else 0.0


def retrieve_phases(law_a,
                    laws_others: dict,
                    taus: dict[str, TransformMatrix],
                    cfg: RetrievalConfig = RetrievalConfig()
                    ) -> tuple[np.ndarray, RetrievalReport]:
    """Fit reference phases to the partner laws.

    Args:
        law_a: measured law of the reference observable (FactualLaw or
            exact probability vector).
        laws_others: measured laws of partner observables, keyed by name.
        taus: transform from the reference to each partner, keyed by name.
        cfg: optimizer settings.

    Returns:
        (phases, report); phases are gauged with the first entry 0.

    Raises:
        InconsistentLawsError: best residual stays above cfg.tol, i.e. no
            state vector reproduces the law set through the transforms.
    """
    if not laws_others:
        raise ValueError("need at least one partner observable")
    amp = amplitudes_from_law(law_a)
    d = amp.shape[0]
    partners = []
    for name, law in laws_others.items():
        if name not in taus:
            raise UnlinkedObservableError(f"no transform to partner {name!r}")
        tau = taus[name]
        if tau.dim != d:
            raise DimensionMismatchError(
                f"transform to {name!r} has dim {tau.dim}, reference has {d}")
        partners.append((tau.entries, law_vector(law)))

    # anchor the optimization gauge on the largest amplitude: fixing a
    # near-zero component would leave a nearly flat global-rotation direction
    anchor = int(np.argmax(amp))
    rng = np.random.default_rng(cfg.seed)
    alpha0 = np.zeros((cfg.restarts, d))
    if cfg.restarts > 1:
        alpha0[1:] = rng.uniform(-np.pi, np.pi, size=(cfg.restarts - 1, d))
    alpha0[:, anchor] = 0.0

    alphas, values = _descend(alpha0, amp, partners, cfg.max_iter,
                              cfg.stop_tol, anchor)
    # report in the standard gauge: first phase zero
    alphas = _wrap_phase(alphas - alphas[:, :1])
    best = int(np.argmin(values))
    best_alpha = alphas[best].copy()
    best_alpha[amp <= ZERO_AMP] = 0.0
    best_alpha[0] = 0.0
    best_val = float(values[best])

    if best_val > cfg.tol:
        raise InconsistentLawsError(
            f"law set is not representable: best residual {best_val:.3e} "
            f"exceeds tolerance {cfg.tol:.3e} after {cfg.restarts} restarts")

    # cluster the converged restarts: one basin means a unique solution, two
    # mean the conjugate/reflected pair, more mean the data underdetermine
    # the phases (expected with a single partner basis)
    tie = max(cfg.tol, best_val * 4.0 + 1e-15)
    clusters = [best_alpha]
    for i in np.argsort(values):
        if float(values[i]) > tie:
            break
        cand = _wrap_phase(alphas[i])
        cand[amp <= ZERO_AMP] = 0.0
        cand[0] = 0.0
        if all(_phase_distance(cand, known, amp) > 1e-3 for known in clusters):
            clusters.append(cand)
    flag = ("unique", "conjugate-pair")[min(len(clusters) - 1, 1)] \
        if len(clusters) <= 2 else "underdetermined"

    report = RetrievalReport(residual=best_val, restarts_used=cfg.restarts,
                             converged=best_val <= cfg.tol,
                             ambiguity_flag=flag,
                             alternate_phases=clusters[1] if len(clusters) > 1
                             else None)
    return best_alpha, report


def assemble_equivalent(law_map: dict,
                        phases_a: np.ndarray,
                        taus: dict[str, TransformMatrix],
                        reference: str) -> ExpansionSet:
    """Derive every other observable's coefficients from the reference
    expansion through the basis transforms."""
    if reference not in law_map:
        raise KeyError(f"reference {reference!r} missing from law map")
    amplitudes = {reference: amplitudes_from_law(law_map[reference])}
    phases = {reference: np.asarray(phases_a, dtype=float)}
    c_ref = amplitudes[reference] * np.exp(1j * phases[reference])
    for name in law_map:
        if name == reference:
            continue
        if name not in taus:
            raise UnlinkedObservableError(f"no transform to {name!r}")
        derived = dirac_transform(c_ref, taus[name])
        amp = np.abs(derived)
        ph = np.angle(derived)
        ph[amp <= ZERO_AMP] = 0.0
        amplitudes[name] = amp
        phases[name] = ph
    return ExpansionSet(reference_observable=reference,
                        amplitudes=amplitudes, phases=phases)


def predict_heldout(expansion: ExpansionSet, tau_to_c: TransformMatrix
                    ) -> np.ndarray:
    """Probability law the expansion predicts for a held-out observable,
    in eigenvalue-index order."""
    if tau_to_c.source != expansion.reference_observable:
        raise UnlinkedObservableError(
            f"transform starts at {tau_to_c.source!r}, expansion reference is "
            f"{expansion.reference_observable!r}")
    if tau_to_c.target == expansion.reference_observable:
        return expansion.amplitudes[expansion.reference_observable] ** 2
    d = dirac_transform(expansion.coefficients(), tau_to_c)
    return np.abs(d) ** 2


class StateReconstructor:
    """Scikit-learn style estimator around the phase-retrieval pipeline.

    fit() consumes measured laws plus reference-to-partner transforms and
    stores the reconstructed expansion; predict() maps a transform to the
    probability law of its target observable.

    Parameters
    ----------
    reference : str or None
        Reference observable; defaults to the first key of the law map.
    restarts, tol, stop_tol, max_iter, seed
        Forwarded to :class:`RetrievalConfig`.
    """

    def __init__(self, reference=None, restarts=32, tol=1e-10,
                 stop_tol=1e-20, max_iter=500, seed=0):
        self.reference = reference
        self.restarts = restarts
        self.tol = tol
        self.stop_tol = stop_tol
        self.max_iter = max_iter
        self.seed = seed

    def get_params(self, deep=True):
        return {"reference": self.reference, "restarts": self.restarts,
                "tol": self.tol, "stop_tol": self.stop_tol,
                "max_iter": self.max_iter, "seed": self.seed}

    def set_params(self, **params):
        for key, value in params.items():
            if key not in self.get_params():
                raise ValueError(f"unknown parameter {key!r}")
            setattr(self, key, value)
        return self

    def _config(self) -> RetrievalConfig:
        return RetrievalConfig(restarts=self.restarts, tol=self.tol,
                               stop_tol=self.stop_tol, max_iter=self.max_iter,
                               seed=self.seed)

    def fit(self, laws: dict, taus) -> "StateReconstructor":
        """Fit phases to the partner laws and assemble the expansion.

        Args:
            laws: map observable name -> measured law (FactualLaw or exact
                probability vector); the reference must be present, every
                other entry acts as a partner.
            taus: iterable of TransformMatrix objects rooted at the reference.
        """
        reference = self.reference if self.reference is not None else next(iter(laws))
        tau_map = {t.target: t for t in taus if t.source == reference}
        partners = {name: law for name, law in laws.items() if name != reference}
        phases, report = retrieve_phases(laws[reference], partners, tau_map,
                                         self._config())
        self.expansion_ = assemble_equivalent(laws, phases, tau_map, reference)
        self.report_ = report
        self.taus_ = tau_map
        return self

    def predict(self, tau: TransformMatrix) -> np.ndarray:
        if not hasattr(self, "expansion_"):
            raise RuntimeError("fit the reconstructor before predicting")
        return predict_heldout(self.expansion_, tau)
