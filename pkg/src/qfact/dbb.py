"""Pilot-wave guidance engine for closed-form interference states.

Covers the stable two-plane-wave state (cosine fringe amplitude, constant
guided velocity along Ox, constant quantum potential, zero quantum force),
the ionization-kick trace model with its 1/lambda direction scaling, the
two-layer desk experiment built on those pieces, and a Monte-Carlo check
of the extended Born conjecture on plane-wave sums.

Conventions: plane waves are written exp(i(p.r - W t)/hbar), so the guided
momentum is hbar times the spatial gradient of the total phase.  This
module carries explicit SI-like constants; the oracle modules upstream are
dimensionless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NodeSingularityError
from .seeding import counter_uniforms
from .validation import check_rng

_AUX_DRAW = 1_000_000  # counter draw indices below this serve rejection rounds


# --------------------------------------------------------------------------
# two-plane-wave interference state
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TwoWaveState:
    """Symmetric superposition of two plane waves of frequency nu and phase
    speed V whose directions make angles +-theta0 with Oz, with relative
    phase delta_phase.  The amplitude is sqrt(2) cos(chi z + delta/2) with
    chi = 2 pi (nu/V) cos(theta0); the corpuscle is guided along Ox at the
    constant speed (c^2/V) sin(theta0)."""

    nu: float            # wave frequency, 1/s
    V: float             # phase speed, m/s
    theta0: float        # half-angle between the branches and Oz, rad
    delta_phase: float   # relative phase of the two branches, rad
    m0: float            # rest mass, kg
    M: float             # quantum mass, kg
    c: float = 299_792_458.0
    h: float = 6.626_070_15e-34

    def __post_init__(self):
        if min(self.nu, self.V, self.m0, self.M, self.c, self.h) <= 0:
            raise ValueError("nu, V, m0, M, c, h must all be positive")
        if self.chi <= 0:
            raise ValueError("chi = 2 pi (nu/V) cos(theta0) must be positive")
        if abs(self.guided_speed) >= self.c:
            raise ValueError("guided speed (c^2/V) sin(theta0) must stay below c")

    @classmethod
    def from_corpuscle_speed(cls, v12: float, theta0: float, delta_phase: float,
                             m0: float, c: float = 299_792_458.0,
                             h: float = 6.626_070_15e-34) -> "TwoWaveState":
        """Consistent parametrization from the corpuscle speed v12 common to
        both branches: M is the relativistic mass, nu = M c^2 / h, V = c^2/v12."""
        if not 0 < v12 < c:
            raise ValueError("corpuscle speed must lie in (0, c)")
        gamma = 1.0 / math.sqrt(1.0 - (v12 / c) ** 2)
        m_quantum = gamma * m0
        return cls(nu=m_quantum * c ** 2 / h, V=c ** 2 / v12, theta0=theta0,
                   delta_phase=delta_phase, m0=m0, M=m_quantum, c=c, h=h)

    @property
    def hbar(self) -> float:
        return self.h / (2.0 * math.pi)

    @property
    def chi(self) -> float:
        return 2.0 * math.pi * (self.nu / self.V) * math.cos(self.theta0)

    @property
    def guided_speed(self) -> float:
        return (self.c ** 2 / self.V) * math.sin(self.theta0)

    @property
    def fringe_period(self) -> float:
        """Period of the squared amplitude along Oz."""
        return math.pi / self.chi

    def branch_momenta(self) -> tuple[np.ndarray, np.ndarray]:
        """De Broglie momenta of the two component plane waves (magnitude
        h nu / V, directions at +-theta0 from Oz in the xz-plane)."""
        p12 = self.h * self.nu / self.V
        s, c0 = math.sin(self.theta0), math.cos(self.theta0)
        return (np.array([p12 * s, 0.0, p12 * c0]),
                np.array([p12 * s, 0.0, -p12 * c0]))

    def total_phase(self, x, z, t) -> np.ndarray:
        """Phase (radians) of the factorized state at (x, z, t)."""
        return (2.0 * math.pi * self.nu
                * (np.asarray(x) * math.sin(self.theta0) / self.V - np.asarray(t))
                + self.delta_phase / 2.0)

    def fringe_window(self, n_periods: int = 8) -> tuple[float, float]:
        half = 0.5 * n_periods * self.fringe_period
        return (-half, half)

    # genesis attachment protocol ------------------------------------------

    def sample_position(self, rng, n_periods: int = 8) -> np.ndarray:
        z = sample_fringe_z(self, check_rng(rng), 1, n_periods=n_periods)[0]
        return np.array([0.0, 0.0, z])

    def momentum_at(self, r, t) -> np.ndarray:
        return guided_momentum(self)


def amplitude(s: TwoWaveState, z, t: float = 0.0) -> np.ndarray:
    """Wave amplitude sqrt(2) cos(chi z + delta/2); stationary in time."""
    return np.sqrt(2.0) * np.cos(s.chi * np.asarray(z, dtype=float)
                                 + s.delta_phase / 2.0)


def fringe_density(s: TwoWaveState, z) -> np.ndarray:
    """Squared amplitude, normalized to peak 1."""
    return np.cos(s.chi * np.asarray(z, dtype=float) + s.delta_phase / 2.0) ** 2


def guided_velocity(s: TwoWaveState) -> np.ndarray:
    """Constant velocity of the corpuscular singularity: along Ox only."""
    return np.array([s.guided_speed, 0.0, 0.0])


def guided_momentum(s: TwoWaveState) -> np.ndarray:
    return s.M * guided_velocity(s)


def quantum_potential(s: TwoWaveState, z) -> float:
    """Q = (h^2 / 8 pi^2 m0) box(a)/a; for the cosine amplitude box(a)/a is
    the constant chi^2, so Q does not depend on z (off the nodes, where the
    quotient is undefined)."""
    if np.min(np.abs(amplitude(s, z))) < 1e-12:
        raise NodeSingularityError("quantum potential undefined on an amplitude node")
    return (s.h ** 2 / (8.0 * math.pi ** 2 * s.m0)) * s.chi ** 2


def quantum_force(s: TwoWaveState, z) -> float:
    """-dQ/dz: identically zero since Q is constant (holds at nodes too)."""
    return 0.0


def default_kappa(s: TwoWaveState) -> float:
    """Kick scale h^2 chi / (4 pi c^2 m0^2), metres of fringe displacement
    per radian of relative-phase change."""
    return s.h ** 2 * s.chi / (4.0 * math.pi * s.c ** 2 * s.m0 ** 2)


def ionization_kick(dd: float, kappa: float) -> float:
    """Fringe displacement from one interaction: delta_z = -kappa * delta_delta."""
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    return -kappa * dd


def trace_angles(kicks, spacings) -> np.ndarray:
    """Running direction of the trace with Ox: after interaction i the angle
    is arctan of the accumulated sum of kick/spacing ratios."""
    kicks = np.asarray(kicks, dtype=float)
    spacings = np.asarray(spacings, dtype=float)
    if kicks.shape != spacings.shape:
        raise ValueError("kicks and spacings must have equal length")
    if np.any(spacings <= 0):
        raise ValueError("spacings must be positive")
    return np.arctan(np.cumsum(kicks / spacings))


# --------------------------------------------------------------------------
# fringe-position sampling
# --------------------------------------------------------------------------

def sample_fringe_z(s: TwoWaveState, rng, n: int, n_periods: int = 8
                    ) -> np.ndarray:
    """Draw z from the fringe density by rejection against its peak."""
    rng = check_rng(rng)
    lo, hi = s.fringe_window(n_periods)
    out = np.empty(n)
    remaining = np.arange(n)
    while remaining.size:
        z = lo + (hi - lo) * rng.random(remaining.size)
        accept = rng.random(remaining.size) <= fringe_density(s, z)
        out[remaining[accept]] = z[accept]
        remaining = remaining[~accept]
    return out


def _sample_fringe_counter(s: TwoWaveState, seed: int, trial_ids: np.ndarray,
                           n_periods: int, draw_base: int = 0) -> np.ndarray:
    """Counter-based rejection sampling: trial i consumes draws
    (draw_base + 2r, draw_base + 2r + 1) for rounds r until acceptance."""
    lo, hi = s.fringe_window(n_periods)
    out = np.empty(trial_ids.size)
    remaining = np.arange(trial_ids.size)
    r = 0
    while remaining.size:
        ids = trial_ids[remaining]
        z = lo + (hi - lo) * counter_uniforms(seed, ids, draw_base + 2 * r)
        accept = counter_uniforms(seed, ids, draw_base + 2 * r + 1) \
            <= fringe_density(s, z)
        out[remaining[accept]] = z[accept]
        remaining = remaining[~accept]
        r += 1
    return out


def _kick_draws(seed: int, trial_ids: np.ndarray, draw: int, law: str,
                half_width: float) -> np.ndarray:
    u = counter_uniforms(seed, trial_ids, draw)
    if law == "uniform":
        return half_width * (2.0 * u - 1.0)
    if law == "normal":
        # Box-Muller against a companion draw
        v = counter_uniforms(seed, trial_ids, draw + 500_000)
        radius = np.sqrt(-2.0 * np.log(np.clip(u, 1e-300, None)))
        return half_width * radius * np.cos(2.0 * np.pi * v)
    raise ValueError(f"unknown kick law {law!r}")


# --------------------------------------------------------------------------
# the two-layer trace experiment
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ExpConfig:
    """Two-layer trace experiment settings.

    lambda_sep is the L1 -> L2 flight distance; kappa the kick scale (None
    picks the state's default); the relative-phase change per interaction
    is drawn from a symmetric law of half-width kick_half_width.
    """

    lambda_sep: float
    kappa: float | None = None
    kick_law: str = "uniform"
    kick_half_width: float = math.pi / 2.0
    n_trials: int = 10_000
    elastic_interactions_per_trial: int = 0
    z_periods: int = 8
    direction_bins: int = 201
    fringe_bins_per_period: int = 20
    lambda_scaling_factors: tuple[float, ...] = (1.0, 2.0, 4.0, 8.0)

    def __post_init__(self):
        if self.lambda_sep <= 0:
            raise ValueError("lambda_sep must be positive")
        if self.kappa is not None and self.kappa < 0:
            raise ValueError("kappa must be non-negative")
        if self.n_trials < 1:
            raise ValueError("n_trials must be positive")


@dataclass
class TraceRecord:
    """Registered ionizations of one specimen and what was read off them."""

    ionizations: list[tuple[np.ndarray, float]]
    estimated_p: np.ndarray
    gammas: np.ndarray

    def __post_init__(self):
        times = [t for _, t in self.ionizations]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("ionization times must be strictly increasing")


@dataclass
class Histogram1D:
    edges: np.ndarray
    mass: np.ndarray

    @classmethod
    def from_samples(cls, samples, edges) -> "Histogram1D":
        counts, _ = np.histogram(samples, bins=edges)
        return cls(edges=np.asarray(edges, dtype=float),
                   mass=counts / max(len(samples), 1))


@dataclass
class ExpSummary:
    n_trials: int
    guided_p: np.ndarray                  # reference value p0 (vector)
    reference_spectrum: tuple[np.ndarray, np.ndarray]  # two-peak branch momenta
    mean_estimated_p: np.ndarray
    sigma_px: float
    sigma_z: float
    heisenberg_product: float
    hbar_half: float
    direction_hist: Histogram1D          # angle of estimated p with Ox
    fringe_hist: Histogram1D             # z at L2
    lambda_table: list[tuple[float, float]]  # (lambda, mean |gamma^(0->1)|)
    phase_relation_conserved: bool


def simulate_exp(s: TwoWaveState, cfg: ExpConfig, rng) -> ExpSummary:
    """Run the two-layer experiment on an ensemble of specimens.

    Per trial: sample the initial z from the fringe density, register the
    first ionization at L1, apply one or two ionization kicks (plus any
    configured elastic kicks), fly at the guided velocity to L2, register
    there, and estimate the momentum as M (r2 - r1)/(t2 - t1).

    ``rng`` may be an integer seed (counter-based per-trial streams, so any
    partition of the trial range reproduces the same ensemble) or a numpy
    Generator.
    """
    kappa = default_kappa(s) if cfg.kappa is None else cfg.kappa
    n = cfg.n_trials
    v = guided_velocity(s)
    if v[0] <= 0:
        raise ValueError("guided speed must be positive to reach L2")

    if isinstance(rng, (int, np.integer)):
        seed = int(rng)
        ids = np.arange(n)
        z0 = _sample_fringe_counter(s, seed, ids, cfg.z_periods)
        u_nion = counter_uniforms(seed, ids, _AUX_DRAW)
        n_ion = 1 + (u_nion < 0.5).astype(int)
        kick_total = np.zeros(n)
        max_kicks = 2 + cfg.elastic_interactions_per_trial
        for k in range(max_kicks):
            dd = _kick_draws(seed, ids, _AUX_DRAW + 1 + k, cfg.kick_law,
                             cfg.kick_half_width)
            applies = np.ones(n, dtype=bool) if k >= 2 \
                else (k < n_ion)
            kick_total += np.where(applies, -kappa * dd, 0.0)
    else:
        gen = check_rng(rng)
        z0 = sample_fringe_z(s, gen, n, cfg.z_periods)
        n_ion = 1 + (gen.random(n) < 0.5).astype(int)
        kick_total = np.zeros(n)
        max_kicks = 2 + cfg.elastic_interactions_per_trial
        for k in range(max_kicks):
            if cfg.kick_law == "uniform":
                dd = cfg.kick_half_width * (2.0 * gen.random(n) - 1.0)
            else:
                dd = cfg.kick_half_width * gen.normal(size=n)
            applies = np.ones(n, dtype=bool) if k >= 2 else (k < n_ion)
            kick_total += np.where(applies, -kappa * dd, 0.0)

    dt = cfg.lambda_sep / v[0]
    z2 = z0 + kick_total
    dx = np.full(n, cfg.lambda_sep)
    dz = z2 - z0
    px = s.M * dx / dt
    pz = s.M * dz / dt
    gamma = np.arctan2(dz, dx)

    # shift-invariant spreads: identical samples give exactly zero sigma
    sigma_px = float(np.std(px - px[0]))
    sigma_z = float(np.std(z0 - z0[0]))

    theta = s.theta0
    dir_edges = np.linspace(-2.0 * theta, 2.0 * theta, cfg.direction_bins + 1)
    lo, hi = s.fringe_window(cfg.z_periods)
    pad = 0.5 * s.fringe_period
    n_fringe_bins = cfg.fringe_bins_per_period * (cfg.z_periods + 1)
    fringe_edges = np.linspace(lo - pad, hi + pad, n_fringe_bins + 1)

    lam_table = []
    for f in cfg.lambda_scaling_factors:
        lam = f * cfg.lambda_sep
        lam_table.append((lam, float(np.mean(np.abs(np.arctan(kick_total / lam))))))

    fringe_hist = Histogram1D.from_samples(z2, fringe_edges)
    conserved = _fringe_phase_conserved(s, fringe_hist)

    return ExpSummary(
        n_trials=n,
        guided_p=guided_momentum(s),
        reference_spectrum=s.branch_momenta(),
        mean_estimated_p=np.array([px.mean(), 0.0, pz.mean()]),
        sigma_px=sigma_px,
        sigma_z=sigma_z,
        heisenberg_product=sigma_px * sigma_z,
        hbar_half=s.hbar / 2.0,
        direction_hist=Histogram1D.from_samples(gamma, dir_edges),
        fringe_hist=fringe_hist,
        lambda_table=lam_table,
        phase_relation_conserved=conserved,
    )


def run_trace(s: TwoWaveState, cfg: ExpConfig, rng) -> TraceRecord:
    """One specimen through the two layers, keeping the raw registrations."""
    gen = check_rng(rng)
    kappa = default_kappa(s) if cfg.kappa is None else cfg.kappa
    z0 = float(sample_fringe_z(s, gen, 1, cfg.z_periods)[0])
    n_ion = 1 if gen.random() < 0.5 else 2
    kick = 0.0
    for _ in range(n_ion + cfg.elastic_interactions_per_trial):
        dd = cfg.kick_half_width * (2.0 * gen.random() - 1.0)
        kick += ionization_kick(dd, kappa)
    v = guided_velocity(s)
    t2 = cfg.lambda_sep / v[0]
    r1 = np.array([0.0, 0.0, z0])
    r2 = np.array([cfg.lambda_sep, 0.0, z0 + kick])
    estimated = s.M * (r2 - r1) / t2
    gammas = np.arctan(np.array([kick]) / cfg.lambda_sep)
    return TraceRecord(ionizations=[(r1, 0.0), (r2, t2)],
                       estimated_p=estimated, gammas=gammas)


def _fringe_phase_conserved(s: TwoWaveState, hist: Histogram1D) -> bool:
    """The L2 position histogram keeps its maxima on the chi-periodic comb:
    mass near density maxima must dominate mass near the nodes."""
    centers = 0.5 * (hist.edges[:-1] + hist.edges[1:])
    density = fringe_density(s, centers)
    near_max = density > 0.9
    near_node = density < 0.1
    if not near_max.any() or not near_node.any():
        return False
    return bool(hist.mass[near_max].mean() > 10.0 * hist.mass[near_node].mean())


def straight_line_positions(s: TwoWaveState, r0, times) -> np.ndarray:
    """Kick-free trajectory: uniform motion at the guided velocity."""
    r0 = np.asarray(r0, dtype=float)
    t = np.asarray(times, dtype=float)[:, None]
    return r0[None, :] + t * guided_velocity(s)[None, :]


# --------------------------------------------------------------------------
# plane-wave sums and the extended Born conjecture
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PlaneWaveSum:
    """Finite sum of plane waves sum_n w_n exp(i p_n . r / hbar) on a
    periodic cube of side ``box``."""

    components: tuple[tuple[complex, tuple[float, float, float]], ...]
    box: float
    hbar: float = 1.0

    def __post_init__(self):
        if not self.components:
            raise ValueError("need at least one component")
        if not any(abs(w) > 0 for w, _ in self.components):
            raise ValueError("weights must not all vanish")
        if self.box <= 0 or self.hbar <= 0:
            raise ValueError("box side and hbar must be positive")

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.components], dtype=np.complex128)

    @property
    def momenta(self) -> np.ndarray:
        return np.array([p for _, p in self.components], dtype=float)

    def field(self, r) -> np.ndarray:
        """psi(r) for r of shape (..., 3)."""
        r = np.asarray(r, dtype=float)
        phases = r @ self.momenta.T / self.hbar
        return np.exp(1j * phases) @ self.weights

    def density_bound(self) -> float:
        """Sharp bound (sum |w_n|)^2 on |psi|^2 for rejection sampling."""
        return float(np.sum(np.abs(self.weights)) ** 2)

    def guided_momentum_at(self, r) -> np.ndarray:
        """hbar grad(arg psi) = hbar Im(grad psi / psi), shape (..., 3)."""
        r = np.asarray(r, dtype=float)
        phases = r @ self.momenta.T / self.hbar
        terms = np.exp(1j * phases) * self.weights  # (..., n)
        psi = terms.sum(axis=-1)
        grad = (terms[..., None] * self.momenta * (1j / self.hbar)).sum(axis=-2)
        return self.hbar * np.imag(grad / psi[..., None])

    # genesis attachment protocol ------------------------------------------

    def sample_position(self, rng) -> np.ndarray:
        return sample_box_positions(self, check_rng(rng), 1)[0]

    def momentum_at(self, r, t) -> np.ndarray:
        return self.guided_momentum_at(np.asarray(r, dtype=float))


def sample_box_positions(w: PlaneWaveSum, rng, n: int) -> np.ndarray:
    """Rejection sampling of |psi|^2 over the box against its sharp bound."""
    rng = check_rng(rng)
    bound = w.density_bound()
    out = np.empty((n, 3))
    remaining = np.arange(n)
    while remaining.size:
        r = rng.random((remaining.size, 3)) * w.box
        accept = rng.random(remaining.size) * bound <= np.abs(w.field(r)) ** 2
        out[remaining[accept]] = r[accept]
        remaining = remaining[~accept]
    return out


def _sample_box_counter(w: PlaneWaveSum, seed: int, trial_ids: np.ndarray
                        ) -> np.ndarray:
    bound = w.density_bound()
    out = np.empty((trial_ids.size, 3))
    remaining = np.arange(trial_ids.size)
    r_round = 0
    while remaining.size:
        ids = trial_ids[remaining]
        r = np.stack([counter_uniforms(seed, ids, 4 * r_round + axis)
                      for axis in range(3)], axis=1) * w.box
        accept = counter_uniforms(seed, ids, 4 * r_round + 3) * bound \
            <= np.abs(w.field(r)) ** 2
        out[remaining[accept]] = r[accept]
        remaining = remaining[~accept]
        r_round += 1
    return out


def pair_sum_spectrum(w: PlaneWaveSum) -> tuple[np.ndarray, np.ndarray]:
    """Conjectured extended momentum spectrum: pairwise component sums
    p_i + p_j (i < j) weighted by |w_i w_j|^2, normalized; a single plane
    wave keeps its own momentum with weight 1."""
    p = w.momenta
    if len(w.components) == 1:
        return p.copy(), np.array([1.0])
    vecs, wts = [], []
    amps = np.abs(w.weights)
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            vecs.append(p[i] + p[j])
            wts.append((amps[i] * amps[j]) ** 2)
    wts = np.array(wts)
    return np.array(vecs), wts / wts.sum()


@dataclass
class BornCheckRecord:
    n_samples: int
    mean_guided_p: np.ndarray
    guided_hists: list[Histogram1D]      # one per Cartesian axis
    candidate_spectrum: tuple[np.ndarray, np.ndarray]
    total_variation: float
    histogram_mass_total: float


def extended_born_check(w: PlaneWaveSum, n_samples: int, rng,
                        bins: int = 64) -> BornCheckRecord:
    """Sample positions from |psi|^2, read the guided momentum at each, and
    compare its distribution with the conjectured pair-sum spectrum.

    The total-variation distance is taken on a common 3-D binning that
    covers both supports; each 1-D marginal histogram normalizes to 1.
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    if isinstance(rng, (int, np.integer)):
        positions = _sample_box_counter(w, int(rng), np.arange(n_samples))
    else:
        positions = sample_box_positions(w, check_rng(rng), n_samples)
    guided = w.guided_momentum_at(positions)

    cand_vecs, cand_wts = pair_sum_spectrum(w)
    scale = max(float(np.max(np.abs(guided))), float(np.max(np.abs(cand_vecs))),
                1e-12)
    edges = []
    for axis in range(3):
        allv = np.concatenate([guided[:, axis], cand_vecs[:, axis]])
        lo, hi = float(allv.min()), float(allv.max())
        if hi - lo <= 1e-9 * scale:
            # spread is numerical noise: the axis is a delta, use one bin
            pad = max(1e-9 * scale, 1e-12)
            edges.append(np.array([lo - pad, hi + pad]))
        else:
            span = (hi - lo) * 0.05
            edges.append(np.linspace(lo - span, hi + span, bins + 1))

    g_hist, _ = np.histogramdd(guided, bins=edges)
    g_hist /= n_samples
    c_hist, _ = np.histogramdd(cand_vecs, bins=edges, weights=cand_wts)
    tv = 0.5 * float(np.abs(g_hist - c_hist).sum())

    marginals = [Histogram1D.from_samples(guided[:, axis], edges[axis])
                 for axis in range(3)]
    return BornCheckRecord(
        n_samples=n_samples,
        mean_guided_p=guided.mean(axis=0),
        guided_hists=marginals,
        candidate_spectrum=(cand_vecs, cand_wts),
        total_variation=tv,
        histogram_mass_total=float(g_hist.sum()),
    )
