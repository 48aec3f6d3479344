"""Client-side behavior: multi-step local SGD and Byzantine message generation.

An honest client runs K^t SGD steps from the broadcast iterate with
per-step rates eta(t, m, k), drawing a fresh stochastic gradient each step
from a stream keyed by (round, client, step). Byzantine clients ignore
schedules and data entirely and emit a vector chosen by their attack kind.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .problems import FullGradient, GradOracleMode, Problem, local_stoch_grad
from .rng import substream

__all__ = [
    "Schedule",
    "ClientSpec",
    "GaussianNoise",
    "SignFlip",
    "ZeroVector",
    "FixedVector",
    "AttackKind",
    "honest_local_update",
    "byzantine_message",
    "floor_decay_steps",
    "linear_decay_steps",
]


@dataclass(frozen=True)
class Schedule:
    """Local-step counts K^t and learning rates eta(t, m, k).

    ``steps`` maps a round index to the number of local updates (0 allowed
    for degenerate tests); ``rate`` maps (round, client, step) to a positive
    learning rate. ``uniform_K``/``uniform_eta`` are set when the schedule
    is constant in all arguments, which is what makes the fixed-setup
    envelope applicable.
    """

    steps: Callable[[int], int]
    rate: Callable[[int, int, int], float]
    uniform_K: int | None = None
    uniform_eta: float | None = None

    @classmethod
    def uniform(cls, K: int, eta: float) -> "Schedule":
        if K < 0:
            raise ValueError(f"K must be nonnegative, got {K}")
        if eta <= 0:
            raise ValueError(f"eta must be positive, got {eta}")
        return cls(steps=lambda t: K, rate=lambda t, m, k: eta, uniform_K=K, uniform_eta=eta)

    @property
    def is_uniform(self) -> bool:
        return self.uniform_K is not None and self.uniform_eta is not None


@dataclass(frozen=True)
class GaussianNoise:
    """Message = mean + isotropic Gaussian with per-coordinate std sigma.

    mean_mode 'zero' centers at the origin; 'honest_center' centers at the
    attacker's estimate of the honest update (the current broadcast).
    """

    sigma: float
    mean_mode: str = "zero"

    def __post_init__(self) -> None:
        if self.sigma < 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        if self.mean_mode not in ("zero", "honest_center"):
            raise ValueError(f"mean_mode must be 'zero' or 'honest_center', got {self.mean_mode!r}")


@dataclass(frozen=True)
class SignFlip:
    """Message = -scale * broadcast iterate."""

    scale: float = 1.0


@dataclass(frozen=True)
class ZeroVector:
    """Message = all-zeros."""


@dataclass(frozen=True)
class FixedVector:
    """Message = a constant vector, independent of everything."""

    v: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "v", np.asarray(self.v, dtype=np.float64))
        if self.v.ndim != 1:
            raise ValueError(f"fixed vector must be 1-D, got shape {self.v.shape}")
        if not np.all(np.isfinite(self.v)):
            raise ValueError("fixed vector must be finite")


AttackKind = GaussianNoise | SignFlip | ZeroVector | FixedVector


@dataclass(frozen=True)
class ClientSpec:
    """Client identity plus behavior: honest when attack is None."""

    m: int
    attack: AttackKind | None = None

    @property
    def honest(self) -> bool:
        return self.attack is None


def honest_local_update(
    problem: Problem,
    m: int,
    w_t: np.ndarray,
    t: int,
    schedule: Schedule,
    oracle_mode: GradOracleMode,
    master_seed: int,
) -> np.ndarray:
    """Run K^t local SGD steps from w_t and return the upload z_m^t.

    Step k uses rate(t, m, k) and a gradient drawn from the stream keyed
    (master_seed, 'grad', t, m, k), so the result is independent of
    evaluation order. K^t = 0 returns w_t unchanged.
    """
    w = np.asarray(w_t, dtype=np.float64).copy()
    K = schedule.steps(t)
    if K < 0:
        raise ValueError(f"steps({t}) must be nonnegative, got {K}")
    needs_rng = not isinstance(oracle_mode, FullGradient)
    for k in range(1, K + 1):
        eta = schedule.rate(t, m, k)
        if eta <= 0:
            raise ValueError(f"rate({t}, {m}, {k}) must be positive, got {eta}")
        rng = substream(master_seed, "grad", t, m, k) if needs_rng else None
        w -= eta * local_stoch_grad(problem, m, w, oracle_mode, rng)
    return w


def byzantine_message(
    attack: AttackKind,
    w_t: np.ndarray,
    rng: np.random.Generator,
    honest_center: np.ndarray | None = None,
) -> np.ndarray:
    """Generate a Byzantine upload of the broadcast's dimension."""
    w_t = np.asarray(w_t, dtype=np.float64)
    if isinstance(attack, ZeroVector):
        return np.zeros_like(w_t)
    if isinstance(attack, FixedVector):
        if attack.v.shape != w_t.shape:
            raise ValueError(f"fixed vector shape {attack.v.shape} != parameter shape {w_t.shape}")
        return attack.v.copy()
    if isinstance(attack, SignFlip):
        return -attack.scale * w_t
    center = np.zeros_like(w_t)
    if attack.mean_mode == "honest_center":
        center = np.asarray(honest_center if honest_center is not None else w_t, dtype=np.float64)
    return center + attack.sigma * rng.standard_normal(w_t.shape[0])


def floor_decay_steps(K1: int, E: int) -> Callable[[int], int]:
    """K^t = K1 * (1 - floor(t / E)): constant K1 for t < E, then 0 at t = E.

    The literal floor form; see linear_decay_steps for the smoothly
    decaying reading of the same recipe.
    """
    if K1 < 1 or E < 1:
        raise ValueError(f"K1 and E must be >= 1, got {K1}, {E}")
    return lambda t: max(0, K1 * (1 - t // E))


def linear_decay_steps(K1: int, E: int) -> Callable[[int], int]:
    """K^t = max(1, round(K1 * (1 - t/E))): linear decay from K1 to a floor of one step."""
    if K1 < 1 or E < 1:
        raise ValueError(f"K1 and E must be >= 1, got {K1}, {E}")
    return lambda t: max(1, round(K1 * (1.0 - t / E)))
