"""Ground-truth synthetic world: latent Markov dynamics, mixing, proprioception.

The latent state is ``z = [z_s, z_c]``. ``z_s`` is driven by actions and seen
through the proprioceptive map; ``z_c`` evolves on its own and is only
visible through the embedding. The embedding ``x = g(z) + noise`` plays the
role of a frozen foundation encoder's output.
"""

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from ..core.errors import DimensionError, DomainError
from ..core.models import WorldSpec
from ..numerics import MlpNet
from ..utils.seeding import derive_rng

SMOOTH_MONOTONE_GAIN = 0.3
RESIDUAL_WIDTH = 32
ACTION_TOL = 1e-9


@dataclass
class World:
    """A WorldSpec with its seeded parameters materialised."""

    spec: WorldSpec
    a_zz: np.ndarray
    b_za: np.ndarray
    dyn_noise: np.ndarray
    mixing: np.ndarray | MlpNet
    task_residual: MlpNet | None = None
    distractor_residual: MlpNet | None = None
    proprio_scale: np.ndarray | None = None
    proprio_shift: np.ndarray | None = None

    @property
    def d_s(self) -> int:
        return self.spec.d_s

    @property
    def d_z(self) -> int:
        return self.spec.d_z

    @property
    def action_low(self) -> np.ndarray:
        return self.spec.action_low

    @property
    def action_high(self) -> np.ndarray:
        return self.spec.action_high


def _orthonormal(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Matrix with orthonormal columns (or rows, when wide)."""
    n = max(rows, cols)
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    return q[:rows, :cols]


def _zero_bias_residual(in_dim: int, out_dim: int, rng: np.random.Generator) -> MlpNet:
    net = MlpNet.init([in_dim, RESIDUAL_WIDTH, out_dim], rng, dtype=np.float64, out_scale=0.1 / np.sqrt(RESIDUAL_WIDTH))
    for layer in net.layers:
        layer.bias[:] = 0.0
    return net


def build_world(spec: WorldSpec, control_matrix: np.ndarray | None = None) -> World:
    """Materialise the seeded parameters of ``spec``.

    ``control_matrix`` overrides the task rows of B (used by the navigation
    world, where actions are planar velocities).
    """
    rng = derive_rng(spec.seed or 0, "world")
    d_s, d_c, d_z = spec.d_s, spec.d_c, spec.d_z

    a_zz = np.eye(d_z)
    if d_c > 0:
        a_zz[d_s:, d_s:] = spec.distractor_decay * _orthonormal(rng, d_c, d_c)

    b_za = np.zeros((d_z, spec.d_a))
    if control_matrix is not None:
        if control_matrix.shape != (d_s, spec.d_a):
            raise DimensionError("control matrix", (d_s, spec.d_a), control_matrix.shape)
        b_za[:d_s] = control_matrix
    elif d_s == spec.d_a:
        b_za[:d_s] = spec.control_gain * np.eye(d_s)
    else:
        b_za[:d_s] = spec.control_gain * _orthonormal(rng, d_s, spec.d_a)

    dyn_noise = np.concatenate([np.full(d_s, spec.noise_std_dyn), np.full(d_c, spec.distractor_std)])

    if spec.mixing_mode == "linear":
        mixing: np.ndarray | MlpNet = rng.standard_normal((spec.d_x, d_z)) / np.sqrt(d_z)
    else:
        mixing = MlpNet.init([d_z, spec.d_x, spec.d_x], rng, dtype=np.float64)

    task_residual = distractor_residual = None
    if spec.dynamics_mode == "tanh-mlp":
        task_residual = _zero_bias_residual(d_s + spec.d_a, d_s, rng)
        if d_c > 0:
            distractor_residual = _zero_bias_residual(d_c, d_c, rng)

    proprio_scale = proprio_shift = None
    if spec.proprio_mode == "scaled-shifted":
        proprio_scale = rng.uniform(0.5, 2.0, d_s)
        proprio_shift = rng.normal(0.0, 0.5, d_s)

    return World(
        spec=spec,
        a_zz=a_zz,
        b_za=b_za,
        dyn_noise=dyn_noise,
        mixing=mixing,
        task_residual=task_residual,
        distractor_residual=distractor_residual,
        proprio_scale=proprio_scale,
        proprio_shift=proprio_shift,
    )


def check_action(world: World, a: np.ndarray) -> None:
    """Raise DomainError if any action leaves the box."""
    if np.any(a < world.action_low - ACTION_TOL) or np.any(a > world.action_high + ACTION_TOL):
        raise DomainError(f"action outside box [{world.action_low}, {world.action_high}]: {a}")


def step_true(world: World, z: np.ndarray, a: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Sample z' given (z, a); works on single states or leading batch axes."""
    z = np.asarray(z, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if z.shape[-1] != world.d_z:
        raise DimensionError("latent", (..., world.d_z), z.shape)
    if a.shape[-1] != world.spec.d_a:
        raise DimensionError("action", (..., world.spec.d_a), a.shape)
    check_action(world, a)

    nxt = z @ world.a_zz.T + a @ world.b_za.T
    if world.task_residual is not None:
        d_s = world.d_s
        nxt[..., :d_s] += world.task_residual(np.concatenate([z[..., :d_s], a], axis=-1))
        if world.distractor_residual is not None:
            nxt[..., d_s:] += world.distractor_residual(z[..., d_s:])
    return nxt + world.dyn_noise * rng.standard_normal(z.shape)


def mix(world: World, z: np.ndarray) -> np.ndarray:
    """Noise-free embedding g(z)."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != world.d_z:
        raise DimensionError("latent", (..., world.d_z), z.shape)
    if isinstance(world.mixing, MlpNet):
        return world.mixing(z)
    return z @ world.mixing.T


def emit_embedding(world: World, z: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """x = g(z) + sigma_x * eps with exogenous i.i.d. eps."""
    x = mix(world, z)
    if world.spec.noise_std_embed > 0:
        x = x + world.spec.noise_std_embed * rng.standard_normal(x.shape)
    return x


def proprio_of(world: World, z_s: np.ndarray) -> np.ndarray:
    """Proprioception m(z_s), a diffeomorphism of the task block."""
    z_s = np.asarray(z_s, dtype=np.float64)
    if z_s.shape[-1] != world.d_s:
        raise DimensionError("task block", (..., world.d_s), z_s.shape)
    match world.spec.proprio_mode:
        case "identity":
            return z_s.copy()
        case "scaled-shifted":
            return z_s * world.proprio_scale + world.proprio_shift
        case "smooth-monotone":
            return z_s + SMOOTH_MONOTONE_GAIN * np.tanh(z_s)
    raise ValueError(f"unknown proprio mode {world.spec.proprio_mode}")


def invert_proprio(world: World, s_p: np.ndarray, maxiter: int = 50) -> np.ndarray:
    """Inverse of ``proprio_of`` on its range."""
    s_p = np.asarray(s_p, dtype=np.float64)
    match world.spec.proprio_mode:
        case "identity":
            return s_p.copy()
        case "scaled-shifted":
            return (s_p - world.proprio_shift) / world.proprio_scale
    if s_p.size == 0:
        return s_p.copy()
    # slope of z + k*tanh(z) stays in [1, 1 + k], so Newton converges from z = s
    k = SMOOTH_MONOTONE_GAIN
    root = optimize.newton(
        lambda z: z + k * np.tanh(z) - s_p.ravel(),
        s_p.ravel(),
        fprime=lambda z: 1.0 + k / np.cosh(z) ** 2,
        tol=1e-13,
        maxiter=maxiter,
    )
    return np.asarray(root, dtype=np.float64).reshape(s_p.shape)


def sample_initial_latent(world: World, rng: np.random.Generator) -> np.ndarray:
    """Uniform task block in [-1, 1], standard-normal distractors."""
    z_s = rng.uniform(-1.0, 1.0, world.d_s)
    z_c = rng.standard_normal(world.spec.d_c)
    return np.concatenate([z_s, z_c])

