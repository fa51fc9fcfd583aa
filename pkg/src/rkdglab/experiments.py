"""Convergence studies: exact-solution transport, L2 errors and EOC tables."""
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BlowUpError
from .mesh import build_mesh_1d, build_mesh_2d
from .operators import DGSpace, eval_grid, project, quadrature_grid
from .schemes import evolve, taylor_scheme

WORKERS_ENV = "RKDGLAB_WORKERS"


# ---------------------------------------------------------------------------
# problems and initial data
# ---------------------------------------------------------------------------

class TravelingSine:
    """sin(2 pi x) or sin(2 pi (x+y)) advected at constant speed."""

    def __init__(self, dim, beta=1.0, beta_x=1.0, beta_y=1.0):
        self.dim = dim
        self.speed = beta if dim == 1 else beta_x + beta_y

    def value(self, *xy):
        return np.sin(2.0 * np.pi * sum(xy))

    def exact(self, t):
        shift = self.speed * t
        return lambda *xy: np.sin(2.0 * np.pi * (sum(xy) - shift))

    def deriv(self, i):
        """i-th advective derivative (-beta . grad)^i of the initial data."""
        amp = (-self.speed * 2.0 * np.pi) ** i
        phase = i * np.pi / 2.0
        return lambda *xy: amp * np.sin(2.0 * np.pi * sum(xy) + phase)


class TravelingSinePower:
    """sin(...)^(flat - 1/3) data of limited smoothness, advected.

    The fractional power is read through the real cube root of an integer
    power: sin^{flat - 1/3} = cbrt(sin^{3 flat - 1}), which is odd or
    nonnegative depending on the parity of 3*flat - 1.
    """

    def __init__(self, dim, flat, beta=1.0, beta_x=1.0, beta_y=1.0):
        if flat < 2:
            raise ValueError("regularity parameter must be >= 2")
        self.dim = dim
        self.flat = flat
        self.speed = beta if dim == 1 else beta_x + beta_y

    def value(self, *xy):
        p = 3 * self.flat - 1
        return np.cbrt(np.sin(2.0 * np.pi * sum(xy)) ** p)

    def exact(self, t):
        p = 3 * self.flat - 1
        shift = self.speed * t
        return lambda *xy: np.cbrt(np.sin(2.0 * np.pi * (sum(xy) - shift)) ** p)

    def deriv(self, i):
        if i == 0:
            return self.value
        raise NotImplementedError("analytic derivatives only kept for smooth data")


@dataclass(frozen=True)
class ProblemSpec:
    """Transport test problem: initial data, regularity, speeds, final time."""

    dim: int
    ic: str                       # "sin" or "sinpow"
    flat: Optional[int] = None    # regularity parameter for sinpow data
    final_time: float = 1.0
    beta: float = 1.0
    beta_x: float = 1.0
    beta_y: float = 1.0

    def __post_init__(self):
        if self.ic not in ("sin", "sinpow"):
            raise ValueError(f"unknown initial condition {self.ic!r}")
        if self.ic == "sinpow" and (self.flat is None or self.flat < 2):
            raise ValueError("sinpow data needs a regularity parameter >= 2")

    def field(self):
        if self.ic == "sin":
            return TravelingSine(self.dim, self.beta, self.beta_x, self.beta_y)
        return TravelingSinePower(self.dim, self.flat, self.beta, self.beta_x, self.beta_y)

    def error_quadrature(self, k):
        # singular sinpow derivatives need denser error quadrature
        base = max(10, k + 4)
        return max(16, k + 4) if self.ic == "sinpow" else base

    def label(self):
        name = self.ic if self.flat is None else f"{self.ic}({self.flat})"
        return f"{name}_{self.dim}d"


def build_problem_mesh(problem, n, perturb=0.0, seed=0):
    if problem.dim == 1:
        return build_mesh_1d(n, perturb_fraction=perturb, seed=seed, beta=problem.beta)
    return build_mesh_2d(n, n, beta_x=problem.beta_x, beta_y=problem.beta_y)


# ---------------------------------------------------------------------------
# error measurement
# ---------------------------------------------------------------------------

def l2_error(u, problem, t, n_points=None):
    """L2 distance between a grid function and the exact solution at time t."""
    space = u.space
    nq = n_points if n_points is not None else problem.error_quadrature(space.degree)
    exact = problem.field().exact(t)
    if space.dim == 1:
        x, w = quadrature_grid(space, nq)
        vals = eval_grid(u, nq)
        return float(np.sqrt(np.sum(w * (vals - exact(x)) ** 2)))
    x, y, w = quadrature_grid(space, nq)
    vals = eval_grid(u, nq)
    fx = exact(x[:, None, :, None], y[None, :, None, :])
    return float(np.sqrt(np.sum(w * (vals - fx) ** 2)))


# ---------------------------------------------------------------------------
# time step rules and table drivers
# ---------------------------------------------------------------------------

def benchmark_tau(order, dim, n):
    """Accuracy-table step sizes: 0.1/(d N), with N^(6/5) refinement at order 5."""
    if order >= 5:
        return 0.1 / (dim * float(n) ** 1.2)
    return 0.1 / (dim * n)


def resolve_timestep(rule, order, dim, n):
    if rule == "benchmark":
        return benchmark_tau(order, dim, n)
    if callable(rule):
        return float(rule(order, dim, n))
    return float(rule)


@dataclass
class AccuracyRow:
    """One table row: scheme at resolution N with its error and EOC."""

    scheme: str
    variant: str
    dim: int
    n: int
    dofs: int
    l2_error: float
    eoc: Optional[float] = None
    flagged: bool = False


def _worker_count(workers):
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get(WORKERS_ENV)
    return max(1, int(env)) if env else 1


def _run_single(scheme, k, problem, n, timestep, perturb, seed, n_quad):
    mesh = build_problem_mesh(problem, n, perturb=perturb, seed=seed)
    space = DGSpace(mesh, k)
    field = problem.field()
    nq = n_quad if n_quad is not None else problem.error_quadrature(k)
    u0 = project(field.value, space, n_points=nq)
    tau = resolve_timestep(timestep, scheme.order, problem.dim, n)
    try:
        result = evolve(scheme, mesh, k, u0, problem.final_time, tau)
    except BlowUpError:
        return math.nan, True
    return l2_error(result.u, problem, problem.final_time, n_points=nq), False


def accuracy_table(schemes, problem, n_list, timestep="benchmark",
                   perturb=0.0, seed=0, workers=None, n_quad=None):
    """Errors and orders over a refinement sweep, for several (scheme, k) pairs.

    schemes is a list of (SchemeSpec, k).  The initial state is the L2
    projection of the initial data.  Rows are ordered by (scheme, N); a
    blow-up is recorded as a flagged row rather than an exception.
    """
    jobs = [(scheme, k, n) for (scheme, k) in schemes for n in n_list]

    def run(job):
        scheme, k, n = job
        err, flagged = _run_single(
            scheme, k, problem, n, timestep, perturb, seed, n_quad,
        )
        return job, err, flagged

    nworkers = _worker_count(workers)
    if nworkers > 1:
        with ThreadPoolExecutor(max_workers=nworkers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]

    by_job = {job: (err, flagged) for job, err, flagged in results}
    rows = []
    for scheme, k in schemes:
        prev = None
        for n in n_list:
            err, flagged = by_job[(scheme, k, n)]
            eoc = None
            if prev is not None and np.isfinite(err) and np.isfinite(prev[1]) and err > 0:
                eoc = math.log(prev[1] / err) / math.log(n / prev[0])
            space_dofs = (k + 1) * n if problem.dim == 1 else n * n * (k + 1) * (k + 2) // 2
            rows.append(AccuracyRow(
                scheme=scheme.label(k).replace("sdA-", ""),
                variant=scheme.variant,
                dim=problem.dim,
                n=n,
                dofs=space_dofs,
                l2_error=err,
                eoc=eoc,
                flagged=flagged,
            ))
            prev = (n, err)
    return rows


def regularity_default_time(order):
    """Long final times make the order degeneracy visible for r = 4, 5."""
    return 1.0 if order <= 3 else 500.0


def regularity_study(scheme, k, flat_mode, n_list, final_time=None,
                     dim=1, perturb=0.0, seed=0, workers=None, n_quad=None):
    """Accuracy sweep for data of limited smoothness, flat = r or r + 1."""
    if scheme.order != k + 1:
        raise ValueError("regularity study is set up for r = k + 1 schemes")
    if flat_mode == "r":
        flat = scheme.order
    elif flat_mode == "r+1":
        flat = scheme.order + 1
    else:
        raise ValueError(f"flat_mode must be 'r' or 'r+1', got {flat_mode!r}")
    t_end = final_time if final_time is not None else regularity_default_time(scheme.order)
    problem = ProblemSpec(dim=dim, ic="sinpow", flat=flat, final_time=t_end)
    return accuracy_table([(scheme, k)], problem, n_list, perturb=perturb,
                          seed=seed, workers=workers, n_quad=n_quad)


def default_schemes(orders=(2, 3, 4, 5), variants=("standard", "sdA")):
    """The r = k + 1 scheme family used in the accuracy studies."""
    return [(taylor_scheme(r, variant), r - 1) for variant in variants for r in orders]
