"""Loss models with computable optimum and curvature constants.

Ridge and logistic problems over per-user datasets, exposing the weighted
global loss, per-user local losses, exact and stochastic gradients, the
strong-convexity / smoothness constants (mu, L), and the global minimizer.
Everything here is deterministic given its inputs; stochastic gradient
oracles take an explicit generator so callers control the stream.
"""

from dataclasses import dataclass, field

import numpy as np

from .rng import substream

__all__ = [
    "Ridge",
    "Logistic",
    "Dataset",
    "Problem",
    "FullGradient",
    "Minibatch",
    "RelativeNoise",
    "SmoothnessConstants",
    "make_synthetic",
    "problem_from_csv",
    "global_loss",
    "local_loss",
    "global_gradient",
    "local_gradient",
    "local_stoch_grad",
    "constants",
    "optimum",
    "test_accuracy",
]


@dataclass(frozen=True)
class Ridge:
    """Squared-error loss 0.5*(x'w - y)^2 with L2 penalty lam/2*||w||^2.

    lam = 0 is allowed; strong convexity must then come from the data Gram.
    """

    lam: float

    def __post_init__(self) -> None:
        if self.lam < 0:
            raise ValueError(f"ridge penalty must be nonnegative, got {self.lam}")


@dataclass(frozen=True)
class Logistic:
    """Binary cross-entropy on labels in {0, 1} with L2 penalty lam/2*||w||^2.

    lam > 0 is required: the unpenalized logistic loss is not strongly convex.
    """

    lam: float

    def __post_init__(self) -> None:
        if self.lam <= 0:
            raise ValueError(f"logistic problems need lam > 0, got {self.lam}")


LossKind = Ridge | Logistic


@dataclass
class Dataset:
    """One user's samples: feature rows (S, p) and scalar targets (S,)."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self) -> None:
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.inputs.ndim != 2 or self.inputs.shape[0] < 1 or self.inputs.shape[1] < 1:
            raise ValueError(f"inputs must be a nonempty (S, p) matrix, got {self.inputs.shape}")
        if self.targets.shape != (self.inputs.shape[0],):
            raise ValueError(
                f"targets shape {self.targets.shape} does not match {self.inputs.shape[0]} rows"
            )
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.targets))):
            raise ValueError("dataset contains non-finite values")

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]


@dataclass
class Problem:
    """Per-user datasets plus the loss kind; caches Gram moments on build."""

    per_user: tuple[Dataset, ...]
    loss_kind: LossKind
    test_set: Dataset | None = None

    user_weights: np.ndarray = field(init=False, repr=False)
    _grams: list[np.ndarray] = field(init=False, repr=False)
    _moments: list[np.ndarray] = field(init=False, repr=False)
    _gram_global: np.ndarray = field(init=False, repr=False)
    _moment_global: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.per_user = tuple(self.per_user)
        if len(self.per_user) < 1:
            raise ValueError("need at least one user")
        dims = {d.dim for d in self.per_user}
        if len(dims) != 1:
            raise ValueError(f"users disagree on feature dimension: {dims}")
        sizes = np.array([d.n_samples for d in self.per_user], dtype=np.float64)
        self.user_weights = sizes / sizes.sum()
        # Cached second moments: G_m = X'X/S_m and c_m = X'y/S_m make full
        # gradients O(p^2) regardless of S_m.
        self._grams = [d.inputs.T @ d.inputs / d.n_samples for d in self.per_user]
        self._moments = [d.inputs.T @ d.targets / d.n_samples for d in self.per_user]
        self._gram_global = sum(
            u * g for u, g in zip(self.user_weights, self._grams)
        )
        self._moment_global = sum(
            u * c for u, c in zip(self.user_weights, self._moments)
        )
        if self.test_set is not None and self.test_set.dim != self.dim:
            raise ValueError("test set dimension does not match training data")

    @property
    def n_users(self) -> int:
        return len(self.per_user)

    @property
    def dim(self) -> int:
        return self.per_user[0].dim

    @property
    def lam(self) -> float:
        return self.loss_kind.lam


@dataclass(frozen=True)
class FullGradient:
    """Exact local gradient."""


@dataclass(frozen=True)
class Minibatch:
    """Gradient over a uniform without-replacement subset of the user's samples.

    Does not satisfy the bounded-relative-variance assumption near the
    optimum (the noise does not vanish with the gradient); runs using it are
    flagged accordingly in traces.
    """

    batch_size: int

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass(frozen=True)
class RelativeNoise:
    """Global gradient plus noise of norm exactly delta * ||grad||.

    The noise direction is uniform on the unit sphere, so the draw is
    unbiased and the squared noise-to-gradient ratio equals delta^2 exactly.
    """

    delta: float

    def __post_init__(self) -> None:
        if self.delta < 0:
            raise ValueError(f"delta must be nonnegative, got {self.delta}")


GradOracleMode = FullGradient | Minibatch | RelativeNoise


@dataclass(frozen=True)
class SmoothnessConstants:
    mu: float
    L_const: float
    delta: float

    def __post_init__(self) -> None:
        if not 0 < self.mu <= self.L_const:
            raise ValueError(f"need 0 < mu <= L, got mu={self.mu}, L={self.L_const}")
        if self.delta < 0:
            raise ValueError(f"delta must be nonnegative, got {self.delta}")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _check_w(problem: Problem, w) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (problem.dim,):
        raise ValueError(f"parameter vector must have shape ({problem.dim},), got {w.shape}")
    return w


def local_loss(problem: Problem, m: int, w) -> float:
    """Per-user loss: sample average plus lam/2 * ||w||^2."""
    if not 0 <= m < problem.n_users:
        raise ValueError(f"user index {m} out of range [0, {problem.n_users})")
    w = _check_w(problem, w)
    data = problem.per_user[m]
    z = data.inputs @ w
    if isinstance(problem.loss_kind, Ridge):
        fit = 0.5 * float(np.mean((z - data.targets) ** 2))
    else:
        fit = float(np.mean(np.logaddexp(0.0, z) - data.targets * z))
    return fit + 0.5 * problem.lam * float(w @ w)


def global_loss(problem: Problem, w) -> float:
    """Sample-size-weighted average of the per-user losses."""
    return float(
        sum(u * local_loss(problem, m, w) for m, u in enumerate(problem.user_weights))
    )


def local_gradient(problem: Problem, m: int, w) -> np.ndarray:
    """Exact gradient of local_loss(problem, m, .)."""
    if not 0 <= m < problem.n_users:
        raise ValueError(f"user index {m} out of range [0, {problem.n_users})")
    w = _check_w(problem, w)
    if isinstance(problem.loss_kind, Ridge):
        return problem._grams[m] @ w - problem._moments[m] + problem.lam * w
    data = problem.per_user[m]
    resid = _sigmoid(data.inputs @ w) - data.targets
    return data.inputs.T @ resid / data.n_samples + problem.lam * w


def global_gradient(problem: Problem, w) -> np.ndarray:
    """Exact gradient of global_loss(problem, .)."""
    w = _check_w(problem, w)
    if isinstance(problem.loss_kind, Ridge):
        return problem._gram_global @ w - problem._moment_global + problem.lam * w
    g = problem.lam * w
    for m, u in enumerate(problem.user_weights):
        data = problem.per_user[m]
        resid = _sigmoid(data.inputs @ w) - data.targets
        g = g + u * (data.inputs.T @ resid / data.n_samples)
    return g


def local_stoch_grad(
    problem: Problem,
    m: int,
    w,
    mode: GradOracleMode,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Stochastic gradient for user m under the given oracle mode.

    FullGradient ignores rng; the other modes require one draw from it, so
    callers key the generator by (round, client, step).
    """
    if isinstance(mode, FullGradient):
        return local_gradient(problem, m, w)
    if rng is None:
        raise ValueError(f"{type(mode).__name__} oracle needs a random generator")
    if isinstance(mode, Minibatch):
        data = problem.per_user[m]
        if mode.batch_size > data.n_samples:
            raise ValueError(
                f"batch_size {mode.batch_size} exceeds user {m}'s {data.n_samples} samples"
            )
        w = _check_w(problem, w)
        idx = rng.choice(data.n_samples, size=mode.batch_size, replace=False)
        X, y = data.inputs[idx], data.targets[idx]
        if isinstance(problem.loss_kind, Ridge):
            return X.T @ (X @ w - y) / mode.batch_size + problem.lam * w
        return X.T @ (_sigmoid(X @ w) - y) / mode.batch_size + problem.lam * w
    # RelativeNoise: perturb the global gradient along a uniform unit direction.
    g = global_gradient(problem, w)
    if mode.delta == 0.0:
        return g
    direction = rng.standard_normal(problem.dim)
    direction /= np.linalg.norm(direction)
    return g + mode.delta * np.linalg.norm(g) * direction


def _lambda_max(H: np.ndarray, rtol: float = 1e-12, max_iters: int = 200_000) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration."""
    p = H.shape[0]
    v = np.ones(p) + 1e-3 * np.arange(p)  # deterministic, generically not orthogonal to the top eigenvector
    v /= np.linalg.norm(v)
    prev = np.inf
    rq = 0.0
    for _ in range(max_iters):
        Hv = H @ v
        rq = float(v @ Hv)
        norm = np.linalg.norm(Hv)
        if norm == 0.0:
            return 0.0
        v = Hv / norm
        if abs(rq - prev) <= rtol * max(abs(rq), np.finfo(np.float64).tiny):
            break
        prev = rq
    return float(v @ (H @ v))


def _lambda_min(H: np.ndarray, rtol: float = 1e-12, max_iters: int = 200_000) -> float:
    """Smallest eigenvalue of a symmetric PD matrix by inverse power iteration."""
    p = H.shape[0]
    v = np.ones(p) + 1e-3 * np.arange(p)
    v /= np.linalg.norm(v)
    prev = np.inf
    for _ in range(max_iters):
        z = np.linalg.solve(H, v)
        rq_inv = float(v @ z)  # Rayleigh quotient of H^{-1}
        v = z / np.linalg.norm(z)
        if abs(rq_inv - prev) <= rtol * max(abs(rq_inv), np.finfo(np.float64).tiny):
            break
        prev = rq_inv
    return float(v @ (H @ v))


def constants(problem: Problem, oracle_mode: GradOracleMode | None = None) -> SmoothnessConstants:
    """Certified (mu, L) for the global loss, plus the oracle's delta.

    Ridge: extreme eigenvalues of the regularized Hessian, each from a
    dedicated power / inverse-power iteration. Logistic: L from the 1/4
    curvature cap of the sigmoid plus lam, and the conservative mu = lam.
    delta echoes the oracle's configured level (0 for full gradients; 0 for
    minibatch, whose noise is not relatively bounded - see Minibatch).
    """
    delta = oracle_mode.delta if isinstance(oracle_mode, RelativeNoise) else 0.0
    if isinstance(problem.loss_kind, Ridge):
        H = problem._gram_global + problem.lam * np.eye(problem.dim)
        L = _lambda_max(H)
        # On a perfectly degenerate spectrum the two iterations agree only to
        # rounding; mu <= L holds mathematically, so clamp the fp excess.
        return SmoothnessConstants(mu=min(_lambda_min(H), L), L_const=L, delta=delta)
    L = 0.25 * _lambda_max(problem._gram_global) + problem.lam
    return SmoothnessConstants(mu=problem.lam, L_const=L, delta=delta)


def optimum(
    problem: Problem,
    grad_tol: float = 1e-10,
    max_iters: int = 500_000,
) -> tuple[np.ndarray, float]:
    """Global minimizer w* and its loss value.

    Ridge: direct solve of the normal equations with iterative refinement to
    residual <= 1e-12 * ||b||. Logistic: full-gradient descent (step
    2/(mu+L)) to gradient norm <= grad_tol; an oracle, not a closed form.
    Raises RuntimeError with the residual if the solve does not converge.
    """
    if isinstance(problem.loss_kind, Ridge):
        H = problem._gram_global + problem.lam * np.eye(problem.dim)
        b = problem._moment_global
        w = np.linalg.solve(H, b)
        target = 1e-12 * np.linalg.norm(b)
        for _ in range(10):
            r = b - H @ w
            if np.linalg.norm(r) <= target:
                break
            w = w + np.linalg.solve(H, r)
        else:
            raise RuntimeError(
                f"normal-equation solve stalled at residual {np.linalg.norm(b - H @ w):.3e} "
                f"(target {target:.3e}); Hessian may be near-singular"
            )
        return w, global_loss(problem, w)

    consts = constants(problem)
    step = 2.0 / (consts.mu + consts.L_const)
    w = np.zeros(problem.dim)
    for _ in range(max_iters):
        g = global_gradient(problem, w)
        if np.linalg.norm(g) <= grad_tol:
            return w, global_loss(problem, w)
        w = w - step * g
    raise RuntimeError(
        f"gradient descent did not reach ||grad|| <= {grad_tol:.1e} in {max_iters} iterations "
        f"(current norm {np.linalg.norm(global_gradient(problem, w)):.3e})"
    )


def test_accuracy(problem: Problem, w) -> float:
    """Fraction of held-out labels matched by thresholding the sigmoid at 1/2."""
    if not isinstance(problem.loss_kind, Logistic):
        raise ValueError("test accuracy is defined for logistic problems only")
    if problem.test_set is None:
        raise ValueError("problem has no held-out test set")
    w = _check_w(problem, w)
    pred = (problem.test_set.inputs @ w) >= 0.0
    return float(np.mean(pred == (problem.test_set.targets >= 0.5)))


def make_synthetic(
    p: int,
    M: int,
    S_per_user: int,
    seed: int,
    heterogeneity: float = 0.0,
    loss_kind: LossKind = Ridge(lam=0.5),
    test_size: int = 500,
) -> Problem:
    """Generate a reproducible synthetic problem.

    Each user's features are sqrt(1-h)*shared + sqrt(h)*independent draws,
    so heterogeneity h=0 hands every user the bitwise-identical dataset
    (local gradients then equal the global gradient exactly) and h=1 makes
    users independent, with standard-normal marginals throughout. Targets
    come from a hidden weight vector: noisy linear responses for ridge,
    thresholded noisy margins for logistic. Logistic problems also carry a
    held-out test set drawn from the shared distribution.
    """
    if p < 1 or M < 1 or S_per_user < 1:
        raise ValueError(f"p, M, S_per_user must be >= 1, got {p}, {M}, {S_per_user}")
    if not 0.0 <= heterogeneity <= 1.0:
        raise ValueError(f"heterogeneity must lie in [0, 1], got {heterogeneity}")

    a = np.sqrt(1.0 - heterogeneity)
    b = np.sqrt(heterogeneity)
    w_true = substream(seed, "data-wtrue").standard_normal(p) / np.sqrt(p)
    X_shared = substream(seed, "data-x-shared").standard_normal((S_per_user, p))
    noise_shared = substream(seed, "data-noise-shared").standard_normal(S_per_user)

    users = []
    for m in range(M):
        X = a * X_shared + b * substream(seed, "data-x", m).standard_normal((S_per_user, p))
        eps = a * noise_shared + b * substream(seed, "data-noise", m).standard_normal(S_per_user)
        margin = X @ w_true
        if isinstance(loss_kind, Ridge):
            y = margin + 0.1 * eps
        else:
            y = (margin + 0.5 * eps > 0.0).astype(np.float64)
        users.append(Dataset(inputs=X, targets=y))

    test_set = None
    if isinstance(loss_kind, Logistic) and test_size > 0:
        rng = substream(seed, "data-test")
        X_test = rng.standard_normal((test_size, p))
        y_test = (X_test @ w_true + 0.5 * rng.standard_normal(test_size) > 0.0).astype(np.float64)
        test_set = Dataset(inputs=X_test, targets=y_test)

    return Problem(per_user=tuple(users), loss_kind=loss_kind, test_set=test_set)


def problem_from_csv(paths, loss_kind: LossKind) -> Problem:
    """Build a problem from one CSV per user: feature columns then a final label column."""
    users = []
    for path in paths:
        table = np.loadtxt(path, delimiter=",", ndmin=2)
        if table.shape[1] < 2:
            raise ValueError(f"{path}: need at least one feature column and a label column")
        users.append(Dataset(inputs=table[:, :-1], targets=table[:, -1]))
    return Problem(per_user=tuple(users), loss_kind=loss_kind)
