"""Stochastic multiplicative learning dynamics on weights and probabilities.

One step draws a one-hot trigger B ~ Multinomial(1, p), a centered bounded
noise vector Z, and moves weights multiplicatively,
w <- w * (1 + alpha * (B + Z)); the induced probabilities follow
p <- p * (1 + alpha * Y) / (p . (1 + alpha * Y)) with Y = B + Z.

The module also provides the exact drift / martingale / residual split of a
probability step, a correlated-trigger variant, a time-varying-intensity
variant, and a seeded trajectory runner.
"""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .simplex import (
    InvalidInputError,
    as_probability_vector,
    probabilities_from_weights,
    validate_intensities,
    validate_weights,
)

# Number of steps worth of random numbers drawn from a stream at a time.
# Both the scalar and the vectorized runners consume streams in these chunks,
# so a trajectory is reproducible from (seed,) alone regardless of batching.
CHUNK = 65536


@dataclass(frozen=True)
class NoiseModel:
    """Centered noise Z with entries in [-(q_bound - 1), q_bound - 1].

    The default is Unif[-1, 1] entrywise (q_bound = 2). A custom bounded
    sampler may be supplied; it receives (rng, size) and must respect the
    stated support and have zero mean.
    """

    kind: str = "uniform-symmetric"
    half_width: float = 1.0
    q_bound: float = 2.0
    sampler: object = None

    def __post_init__(self):
        if self.q_bound <= 1.0:
            raise InvalidInputError("q_bound must exceed 1")
        if not (0.0 < self.half_width <= self.q_bound - 1.0):
            raise InvalidInputError("half_width must lie in (0, q_bound - 1]")
        if self.kind not in ("uniform-symmetric", "custom-bounded"):
            raise InvalidInputError("unknown noise kind %r" % self.kind)
        if self.kind == "custom-bounded" and self.sampler is None:
            raise InvalidInputError("custom-bounded noise needs a sampler")

    def sample(self, rng, size):
        if self.kind == "uniform-symmetric":
            return rng.uniform(-self.half_width, self.half_width, size)
        z = np.asarray(self.sampler(rng, size), dtype=float)
        if np.any(np.abs(z) > self.q_bound - 1.0 + 1e-12):
            raise InvalidInputError("custom sampler left the stated support")
        return z


@dataclass
class StepSample:
    """One step's randomness: one-hot trigger, noise, and their sum Y."""

    trigger: np.ndarray
    trigger_index: int
    noise: np.ndarray

    @property
    def y(self):
        return self.trigger + self.noise


@dataclass
class NoiseDecomposition:
    """Exact split of a probability step into drift, martingale noise, and
    a second-order residual:

        p_next = p + alpha * drift - alpha * xi - theta

    with |theta_i| <= alpha^2 * 2 Q^2 / (1 - Q alpha)^3 * p_i (1 - p_i)
    almost surely.
    """

    drift: np.ndarray
    xi: np.ndarray
    theta: np.ndarray
    theta_bound: np.ndarray


def sample_trigger(p, rng):
    """One-hot multinomial draw from p via inverse CDF (cumulative in index
    order, so ties and zero entries are handled deterministically)."""
    p = np.asarray(p, dtype=float)
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(p), u, side="right"))
    idx = min(idx, p.size - 1)
    b = np.zeros(p.size)
    b[idx] = 1.0
    return b, idx


def draw_step_sample(p, noise, rng):
    b, idx = sample_trigger(p, rng)
    z = noise.sample(rng, p.shape[0])
    return StepSample(trigger=b, trigger_index=idx, noise=z)


def step_weights(w, alpha, y):
    """Multiplicative weight update w * (1 + alpha * y)."""
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    if alpha <= 0:
        raise InvalidInputError("alpha must be positive")
    factors = 1.0 + alpha * y
    if np.any(factors <= 0):
        raise InvalidInputError("update factor not positive; alpha too large for this noise")
    return w * factors


def step_probabilities(p, alpha, y):
    """Probability update p * (1 + alpha y) / (p . (1 + alpha y)).

    Zero entries stay exactly zero and the output sums to 1 up to rounding."""
    p = np.asarray(p, dtype=float)
    y = np.asarray(y, dtype=float)
    num = p * (1.0 + alpha * y)
    denom = num.sum()
    if denom <= 0:
        raise InvalidInputError("step denominator not positive")
    return num / denom


def decompose_step(p, alpha, y, gamma=None, q_bound=2.0):
    """Exact drift / martingale / residual split of one probability step.

    With s = p.y and m = E[Y | p] (m = p for independent triggers, m = gamma @ p
    when triggers are correlated through gamma):

        drift_i = p_i (m_i - p.m)
        xi_i    = drift_i - p_i (y_i - s)          (conditionally centered)
        theta_i = alpha^2 p_i s (y_i - s) / (1 + alpha s)   (exact residual)

    so that step_probabilities(p, alpha, y) == p + alpha*drift - alpha*xi - theta
    identically.
    """
    p = np.asarray(p, dtype=float)
    y = np.asarray(y, dtype=float)
    m = p if gamma is None else np.asarray(gamma, dtype=float) @ p
    s = float(np.dot(p, y))
    drift = p * (m - np.dot(p, m))
    xi = drift - p * (y - s)
    theta = alpha * alpha * p * s * (y - s) / (1.0 + alpha * s)
    qa = q_bound * alpha
    bound = alpha * alpha * 2.0 * q_bound * q_bound / (1.0 - qa) ** 3 * p * (1.0 - p)
    return NoiseDecomposition(drift=drift, xi=xi, theta=theta, theta_bound=bound)


def decompose_steps_batch(p, alpha, y, gamma=None, q_bound=2.0):
    """Vectorized `decompose_step` over a batch: p, y of shape (n, d).

    Returns (drift, xi, theta, theta_bound, p_next) arrays."""
    p = np.asarray(p, dtype=float)
    y = np.asarray(y, dtype=float)
    m = p if gamma is None else p @ np.asarray(gamma, dtype=float).T
    s = (p * y).sum(axis=1, keepdims=True)
    pm = (p * m).sum(axis=1, keepdims=True)
    drift = p * (m - pm)
    xi = drift - p * (y - s)
    theta = alpha * alpha * p * s * (y - s) / (1.0 + alpha * s)
    qa = q_bound * alpha
    bound = alpha * alpha * 2.0 * q_bound * q_bound / (1.0 - qa) ** 3 * p * (1.0 - p)
    num = p * (1.0 + alpha * y)
    p_next = num / num.sum(axis=1, keepdims=True)
    return drift, xi, theta, bound, p_next


def validate_correlation(gamma):
    """Validate a trigger-correlation matrix: symmetric, unit diagonal,
    off-diagonal entries in [0, 1]."""
    g = np.asarray(gamma, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise InvalidInputError("correlation matrix must be square")
    if not np.allclose(g, g.T, atol=0.0):
        raise InvalidInputError("correlation matrix must be symmetric")
    if not np.all(np.diag(g) == 1.0):
        raise InvalidInputError("correlation matrix needs unit diagonal")
    off = g[~np.eye(g.shape[0], dtype=bool)]
    if np.any(off < 0) or np.any(off > 1):
        raise InvalidInputError("off-diagonal entries must lie in [0, 1]")
    return g


def correlated_signal(trigger_index, gamma_uniforms, gamma, d):
    """Spike indicator vector S given the trigger index: S is the trigger
    column of a symmetric Bernoulli matrix C with C_ij ~ Ber(gamma_ij),
    C_ii = 1. gamma_uniforms supplies one uniform per unordered pair (i<j),
    in lexicographic pair order."""
    s = np.zeros(d)
    s[trigger_index] = 1.0
    k = 0
    for i in range(d):
        for j in range(i + 1, d):
            if i == trigger_index and gamma_uniforms[k] < gamma[i, j]:
                s[j] = 1.0
            elif j == trigger_index and gamma_uniforms[k] < gamma[i, j]:
                s[i] = 1.0
            k += 1
    return s


def step_correlated(p, gamma, alpha, noise, rng):
    """One probability step in the correlated-trigger model.

    P(S_i = 1 | p) = (gamma @ p)_i; returns (p_next, StepSample with the
    combined trigger-plus-correlation indicator as `trigger`)."""
    p = np.asarray(p, dtype=float)
    d = p.size
    gamma = validate_correlation(gamma)
    b, idx = sample_trigger(p, rng)
    z = noise.sample(rng, d)
    gu = rng.random(d * (d - 1) // 2)
    s = correlated_signal(idx, gu, gamma, d)
    y = s + z
    return step_probabilities(p, alpha, y), StepSample(trigger=s, trigger_index=idx, noise=z)


def step_inhomogeneous(w, lam_next, alpha, y):
    """Weight update under time-varying intensities: weights move as usual and
    the next probabilities are read out with the next intensity vector.

    Returns (w_next, p_next)."""
    w_next = step_weights(w, alpha, y)
    return w_next, probabilities_from_weights(lam_next, w_next)


@dataclass
class DynamicsConfig:
    """Configuration for a trajectory of the stochastic dynamics.

    variant is one of "independent", "correlated", "inhomogeneous". For
    weight tracking supply intensities lam and initial weights w0; otherwise
    supply p0 directly. intensity_schedule(k) must return the intensity vector
    in force when computing p(k) (inhomogeneous variant only).
    """

    alpha: float
    n_steps: int
    p0: object = None
    lam: object = None
    w0: object = None
    noise: NoiseModel = field(default_factory=NoiseModel)
    variant: str = "independent"
    gamma: object = None
    intensity_schedule: object = None
    record_stride: int = 1
    record_samples: bool = False

    def validated(self):
        errors = []
        if not (0 < self.alpha < 1.0 / self.noise.q_bound):
            errors.append(
                "alpha=%g outside (0, 1/Q)=(0, %g)" % (self.alpha, 1.0 / self.noise.q_bound)
            )
        if self.n_steps < 0:
            errors.append("n_steps must be nonnegative")
        if self.record_stride < 1:
            errors.append("record_stride must be >= 1")
        if self.variant not in ("independent", "correlated", "inhomogeneous"):
            errors.append("unknown variant %r" % self.variant)
        if self.variant == "correlated" and self.gamma is None:
            errors.append("correlated variant requires gamma")
        if self.variant == "inhomogeneous" and (
            self.intensity_schedule is None or self.w0 is None
        ):
            errors.append("inhomogeneous variant requires intensity_schedule and w0")
        if self.p0 is None and (self.lam is None or self.w0 is None):
            errors.append("need either p0 or (lam, w0)")
        if errors:
            raise InvalidInputError("; ".join(errors))
        return self

    def initial_state(self):
        if self.variant == "inhomogeneous":
            lam0 = np.asarray(self.intensity_schedule(0), dtype=float)
            w0 = validate_weights(self.w0)
            return probabilities_from_weights(lam0, w0), w0.copy()
        if self.p0 is not None:
            return as_probability_vector(self.p0), None if self.w0 is None else validate_weights(self.w0).copy()
        lam = validate_intensities(self.lam)
        w0 = validate_weights(self.w0)
        return probabilities_from_weights(lam, w0), w0.copy()

    def digest(self):
        payload = {
            "alpha": self.alpha,
            "n_steps": self.n_steps,
            "p0": None if self.p0 is None else list(np.asarray(self.p0, dtype=float)),
            "lam": None if self.lam is None else list(np.asarray(self.lam, dtype=float)),
            "w0": None if self.w0 is None else list(np.asarray(self.w0, dtype=float)),
            "noise": [self.noise.kind, self.noise.half_width, self.noise.q_bound],
            "variant": self.variant,
            "gamma": None if self.gamma is None else np.asarray(self.gamma, dtype=float).tolist(),
            "schedule": None
            if self.intensity_schedule is None
            else getattr(self.intensity_schedule, "__name__", "schedule"),
            "record_stride": self.record_stride,
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


@dataclass
class TrajectoryRecord:
    """Recorded trajectory: states[i] is p at step recorded_steps[i]."""

    recorded_steps: np.ndarray
    states: np.ndarray
    weights: np.ndarray = None
    y_samples: np.ndarray = None
    trigger_indices: np.ndarray = None
    seed: object = None
    config_digest: str = ""


def stream_for(seed):
    """Deterministic generator for a trajectory key (int or tuple of ints)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def run_trajectory(config, seed):
    """Run one seeded trajectory of the configured dynamics.

    Randomness is consumed in fixed chunked order (trigger uniforms, noise,
    correlation uniforms) so results depend only on (config, seed)."""
    config.validated()
    p, w = config.initial_state()
    d = p.size
    gamma = None if config.gamma is None else validate_correlation(config.gamma)
    n_pairs = d * (d - 1) // 2
    rng = stream_for(seed)
    n = config.n_steps
    stride = config.record_stride
    rec_steps = list(range(0, n + 1, stride))
    if rec_steps[-1] != n:
        rec_steps.append(n)
    rec_steps = np.array(rec_steps, dtype=int)
    states = np.empty((rec_steps.size, d))
    weights = np.empty((rec_steps.size, d)) if w is not None else None
    y_samples = np.empty((n, d)) if config.record_samples else None
    triggers = np.empty(n, dtype=int) if config.record_samples else None
    rec_pos = 0
    if rec_steps.size and rec_steps[0] == 0:
        states[0] = p
        if weights is not None:
            weights[0] = w
        rec_pos = 1
    k = 0
    while k < n:
        m = min(CHUNK, n - k)
        u = rng.random(m)
        z = config.noise.sample(rng, (m, d))
        gu = rng.random((m, n_pairs)) if config.variant == "correlated" else None
        for t in range(m):
            idx = int(np.searchsorted(np.cumsum(p), u[t], side="right"))
            idx = min(idx, d - 1)
            if config.variant == "correlated":
                sig = correlated_signal(idx, gu[t], gamma, d)
            else:
                sig = np.zeros(d)
                sig[idx] = 1.0
            y = sig + z[t]
            if config.record_samples:
                y_samples[k] = y
                triggers[k] = idx
            if w is not None:
                w = step_weights(w, config.alpha, y)
                if config.variant == "inhomogeneous":
                    lam = np.asarray(config.intensity_schedule(k + 1), dtype=float)
                else:
                    lam = np.asarray(config.lam, dtype=float)
                p = probabilities_from_weights(lam, w)
            else:
                p = step_probabilities(p, config.alpha, y)
            k += 1
            if rec_pos < rec_steps.size and rec_steps[rec_pos] == k:
                states[rec_pos] = p
                if weights is not None:
                    weights[rec_pos] = w
                rec_pos += 1
    return TrajectoryRecord(
        recorded_steps=rec_steps,
        states=states,
        weights=weights,
        y_samples=y_samples,
        trigger_indices=triggers,
        seed=seed,
        config_digest=config.digest(),
    )
