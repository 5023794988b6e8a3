"""Synthetic benchmark systems.

Two families of generators, both seeded and fully deterministic:

* Coupled Lorenz networks: g = n/3 classic Lorenz oscillators, coupled in a
  ring through their first coordinates, integrated with fixed-step RK4.
  Useful as a high-dimensional chaotic source with a tunable amount of
  shared structure.

* Bifurcation ring networks: nodes driven slowly through a fold or a Hopf
  bifurcation by a control parameter p(tau) that ramps from -1 through 0
  (reached exactly at tau_star) up to +0.3.  Integrated with
  Euler-Maruyama under small dynamical noise, one recorded sample per tau
  step.  These provide ground-truth tipping points for detector tests.

Observation noise is applied separately by add_observation_noise so the
same latent trajectory can be corrupted at several intensities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .core import SeriesMatrix
from .errors import ParameterError

# Cubic damping added to the fold normal form.  It does not move the
# bifurcation (x = 0, p = 0 still satisfies f = 0, f' = 0) but gives the
# escaping trajectory a finite resting branch near -1/eps instead of a
# finite-time blow-up.
_FOLD_CUBIC = 0.05

# Angular frequency of the Hopf oscillators.
_HOPF_OMEGA = 1.0

_DEFAULT_NODES = {"fold": 18, "hopf": 16}


@dataclass
class LorenzConfig:
    """Coupled Lorenz ring with n/3 oscillators sampled at m time points.

    sigma, rho, beta are the classic chaotic parameters.  coupling feeds
    x_{k+1} - x_k into the first coordinate of oscillator k (zero for
    independent oscillators).  Integration uses RK4 with step dt (at most
    0.02 for accuracy), discards transient_steps steps, then records every
    sample_every-th step.  The seed draws the initial condition.
    """

    n: int
    m: int
    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0
    coupling: float = 1.0
    dt: float = 0.01
    sample_every: int = 10
    transient_steps: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.n < 3 or self.n % 3 != 0:
            raise ParameterError(f"n must be a positive multiple of 3, got {self.n}")
        if self.m < 2:
            raise ParameterError(f"m must be >= 2, got {self.m}")
        if not 0.0 < self.dt <= 0.02:
            raise ParameterError(f"dt must lie in (0, 0.02], got {self.dt}")
        if self.sample_every < 1:
            raise ParameterError(f"sample_every must be >= 1, got {self.sample_every}")
        if self.transient_steps < 0:
            raise ParameterError(f"transient_steps must be >= 0, got {self.transient_steps}")


@dataclass
class BifNetConfig:
    """Ring network ramped through a bifurcation.

    kind "fold": node states follow dx_i = -(x_i^2 + p) - 0.05 x_i^3 plus
    diffusive ring coupling; before the transition each node sits on the
    stable branch near sqrt(-p).  kind "hopf": adjacent state pairs form
    oscillators dx = p x - w y - x (x^2 + y^2), dy = w x + p y - y (...),
    ring-coupled diffusively; nodes must be even.

    p(tau) is piecewise linear over tau = 1..tau_steps: from -1 at tau = 1
    to 0 exactly at tau_star, then on to +0.3 at tau_steps.  Each tau step
    holds p fixed and advances `substeps` Euler-Maruyama steps of size dt
    with dynamical noise of standard deviation `noise`.
    """

    kind: str
    nodes: int | None = None
    tau_steps: int = 300
    tau_star: int = 200
    coupling: float = 0.2
    noise: float = 0.05
    dt: float = 0.01
    substeps: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.kind not in _DEFAULT_NODES:
            raise ParameterError(f"kind must be 'fold' or 'hopf', got {self.kind!r}")
        if self.nodes is None:
            self.nodes = _DEFAULT_NODES[self.kind]
        if self.nodes < 2:
            raise ParameterError(f"nodes must be >= 2, got {self.nodes}")
        if self.kind == "hopf" and self.nodes % 2 != 0:
            raise ParameterError(f"hopf networks need an even node count, got {self.nodes}")
        if self.tau_steps < 2:
            raise ParameterError(f"tau_steps must be >= 2, got {self.tau_steps}")
        if not 1 <= self.tau_star <= self.tau_steps:
            raise ParameterError(
                f"tau_star must lie in [1, {self.tau_steps}], got {self.tau_star}"
            )
        if self.noise < 0:
            raise ParameterError(f"noise must be >= 0, got {self.noise}")
        if self.dt <= 0:
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if self.substeps < 1:
            raise ParameterError(f"substeps must be >= 1, got {self.substeps}")

    def parameter_at(self, tau):
        """The ramp value p(tau) for integer tau in [1, tau_steps]."""
        tau = np.asarray(tau, dtype=float)
        if np.any(tau < 1) or np.any(tau > self.tau_steps):
            raise ParameterError(f"tau must lie in [1, {self.tau_steps}]")
        if self.tau_star > 1:
            before = (tau - self.tau_star) / (self.tau_star - 1)
        else:
            before = np.zeros_like(tau)
        if self.tau_steps > self.tau_star:
            after = 0.3 * (tau - self.tau_star) / (self.tau_steps - self.tau_star)
        else:
            after = np.zeros_like(tau)
        p = np.where(tau <= self.tau_star, before, after)
        return float(p) if p.ndim == 0 else p


@dataclass
class NoiseSpec:
    """Additive i.i.d. Gaussian observation noise with standard deviation sd."""

    sd: float
    seed: int = 0

    def __post_init__(self):
        if self.sd < 0:
            raise ParameterError(f"noise sd must be >= 0, got {self.sd}")


@numba.njit(cache=True)
def _lorenz_drift(s, sigma, rho, beta, coupling):
    g = s.shape[0] // 3
    out = np.empty_like(s)
    for k in range(g):
        x = s[3 * k]
        y = s[3 * k + 1]
        z = s[3 * k + 2]
        x_next = s[3 * ((k + 1) % g)]
        out[3 * k] = sigma * (y - x) + coupling * (x_next - x)
        out[3 * k + 1] = x * (rho - z) - y
        out[3 * k + 2] = x * y - beta * z
    return out


@numba.njit(cache=True)
def _lorenz_run(state, transient, sample_every, n_samples, dt, sigma, rho, beta, c):
    s = state.copy()
    for _ in range(transient):
        k1 = _lorenz_drift(s, sigma, rho, beta, c)
        k2 = _lorenz_drift(s + 0.5 * dt * k1, sigma, rho, beta, c)
        k3 = _lorenz_drift(s + 0.5 * dt * k2, sigma, rho, beta, c)
        k4 = _lorenz_drift(s + dt * k3, sigma, rho, beta, c)
        s = s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    out = np.empty((n_samples, s.shape[0]))
    out[0] = s
    for i in range(1, n_samples):
        for _ in range(sample_every):
            k1 = _lorenz_drift(s, sigma, rho, beta, c)
            k2 = _lorenz_drift(s + 0.5 * dt * k1, sigma, rho, beta, c)
            k3 = _lorenz_drift(s + 0.5 * dt * k2, sigma, rho, beta, c)
            k4 = _lorenz_drift(s + dt * k3, sigma, rho, beta, c)
            s = s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[i] = s
    return out


def simulate_coupled_lorenz(cfg: LorenzConfig) -> SeriesMatrix:
    """Integrate the coupled Lorenz ring and return n variables x m samples.

    Rows are grouped per oscillator as (x_k, y_k, z_k).  The initial
    condition is drawn from the seed near the attractor; the recorded block
    starts right after the transient, with sample_every integration steps
    between consecutive columns.
    """
    rng = np.random.default_rng(cfg.seed)
    g = cfg.n // 3
    init = np.empty(cfg.n)
    init[0::3] = rng.uniform(-10.0, 10.0, g)
    init[1::3] = rng.uniform(-10.0, 10.0, g)
    init[2::3] = rng.uniform(15.0, 35.0, g)
    samples = _lorenz_run(
        init,
        cfg.transient_steps,
        cfg.sample_every,
        cfg.m,
        cfg.dt,
        float(cfg.sigma),
        float(cfg.rho),
        float(cfg.beta),
        float(cfg.coupling),
    )
    names = [f"{c}{k + 1}" for k in range(g) for c in "xyz"]
    times = (cfg.transient_steps + cfg.sample_every * np.arange(cfg.m)) * cfg.dt
    return SeriesMatrix(samples.T, variable_names=names, time_index=times)


@numba.njit(cache=True)
def _fold_drift(x, p, coupling, eps):
    n = x.shape[0]
    out = np.empty_like(x)
    for i in range(n):
        ring = x[(i - 1) % n] + x[(i + 1) % n] - 2.0 * x[i]
        out[i] = -(x[i] * x[i] + p) - eps * x[i] ** 3 + coupling * ring
    return out


@numba.njit(cache=True)
def _hopf_drift(s, p, coupling, omega):
    g = s.shape[0] // 2
    out = np.empty_like(s)
    for j in range(g):
        x = s[2 * j]
        y = s[2 * j + 1]
        r2 = x * x + y * y
        ring_x = s[2 * ((j - 1) % g)] + s[2 * ((j + 1) % g)] - 2.0 * x
        ring_y = s[2 * ((j - 1) % g) + 1] + s[2 * ((j + 1) % g) + 1] - 2.0 * y
        out[2 * j] = p * x - omega * y - x * r2 + coupling * ring_x
        out[2 * j + 1] = omega * x + p * y - y * r2 + coupling * ring_y
    return out


@numba.njit(cache=True)
def _bifnet_run(x0, ramp, noise_sd, dt, substeps, coupling, is_fold, eps, omega, xi):
    tau_steps = ramp.shape[0]
    n = x0.shape[0]
    out = np.empty((tau_steps, n))
    x = x0.copy()
    amp = noise_sd * np.sqrt(dt)
    for t in range(tau_steps):
        p = ramp[t]
        for s in range(substeps):
            if is_fold:
                f = _fold_drift(x, p, coupling, eps)
            else:
                f = _hopf_drift(x, p, coupling, omega)
            for i in range(n):
                x[i] += f[i] * dt + amp * xi[t, s, i]
        out[t] = x
    return out


def network_drift(cfg: BifNetConfig, state, p: float):
    """Deterministic drift of the configured network at parameter value p.

    Exposes the exact vector field the integrator uses, which makes
    finite-difference Jacobian checks straightforward.
    """
    state = np.asarray(state, dtype=float)
    if state.shape != (cfg.nodes,):
        raise ParameterError(f"state must have shape ({cfg.nodes},), got {state.shape}")
    if cfg.kind == "fold":
        return _fold_drift(state, float(p), float(cfg.coupling), _FOLD_CUBIC)
    return _hopf_drift(state, float(p), float(cfg.coupling), _HOPF_OMEGA)


def fold_branch(p: float, eps: float = _FOLD_CUBIC) -> float:
    """Stable pre-transition equilibrium of the uncoupled fold node.

    The positive root of x^2 + p + eps x^3 = 0, close to sqrt(-p) for
    p < 0.  Returns 0 at and beyond the bifurcation (p >= 0).
    """
    if p >= 0:
        return 0.0
    x = float(np.sqrt(-p))
    for _ in range(60):
        g = x * x + p + eps * x**3
        dg = 2.0 * x + 3.0 * eps * x * x
        step = g / dg
        x -= step
        if abs(step) < 1e-14:
            break
    return x


def simulate_bifurcation_network(cfg: BifNetConfig):
    """Integrate the ramped network; returns (series, tau_star).

    The series has one column per tau step (columns are indexed 1..tau_steps
    in the time index).  Fold networks start on the stable branch at
    p(1); Hopf networks start at the origin.  All randomness comes from the
    seed, so identical configs give identical output.
    """
    ramp = cfg.parameter_at(np.arange(1, cfg.tau_steps + 1))
    if cfg.kind == "fold":
        x0 = np.full(cfg.nodes, fold_branch(ramp[0]))
    else:
        x0 = np.zeros(cfg.nodes)
    rng = np.random.default_rng(cfg.seed)
    xi = rng.standard_normal((cfg.tau_steps, cfg.substeps, cfg.nodes))
    samples = _bifnet_run(
        x0,
        ramp,
        float(cfg.noise),
        float(cfg.dt),
        cfg.substeps,
        float(cfg.coupling),
        cfg.kind == "fold",
        _FOLD_CUBIC,
        _HOPF_OMEGA,
        xi,
    )
    if cfg.kind == "fold":
        names = [f"n{i + 1}" for i in range(cfg.nodes)]
    else:
        names = [f"{c}{j + 1}" for j in range(cfg.nodes // 2) for c in "xy"]
    times = np.arange(1, cfg.tau_steps + 1, dtype=float)
    return SeriesMatrix(samples.T, variable_names=names, time_index=times), cfg.tau_star


def add_observation_noise(x: SeriesMatrix, spec: NoiseSpec) -> SeriesMatrix:
    """Add seeded i.i.d. Gaussian noise to every entry; sd = 0 returns x unchanged."""
    if spec.sd == 0.0:
        return x
    rng = np.random.default_rng(spec.seed)
    noisy = x.values + spec.sd * rng.standard_normal(x.values.shape)
    return SeriesMatrix(noisy, x.variable_names, x.time_index)
