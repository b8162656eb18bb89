"""Synthetic bandwidth traces.

Individual bandwidth is the discretized stochastic integral of traffic
against increments of a zero-mean OU peer process:

    bw_i = | B_i * (S_{i+1} - S_i) |,   i = 0 .. count - 1

with ``B_i`` a fresh power-law traffic sample for step ``i`` (the sample
belonging to the step's right endpoint) and ``S`` one exact OU path.
Aggregated bandwidth is the pointwise sum of independently seeded individual
traces; a multiservice model is a named collection of independent traces.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from ._validation import check_count, check_finite_scalar, spawn_seeds
from .exceptions import InvalidArgument
from .ou import Grid, OuParams, Trace, ou_generate_path
from .traffic import PowerLawParams, generate_traffic_series

__all__ = [
    "BandwidthSpec",
    "AggregateSpec",
    "MultiserviceSpec",
    "BandwidthSample",
    "synthesize_bandwidth",
    "synthesize_with_factors",
    "synthesize_aggregate",
    "synthesize_multiservice",
]


@dataclass(frozen=True)
class BandwidthSpec:
    """One individual-bandwidth model instance.

    ``kprime`` is the free constant of the closed-form moment formulas; the
    generator never reads it.  ``epsilon`` is the Hurst slack and
    ``burn_in`` the number of leading steps simulated and then discarded.
    """

    traffic: PowerLawParams
    ou: OuParams
    grid: Grid
    kprime: float = 0.0
    epsilon: float = 0.0
    burn_in: int = 0

    def __post_init__(self):
        if not isinstance(self.traffic, PowerLawParams):
            raise InvalidArgument("traffic must be PowerLawParams")
        if not isinstance(self.ou, OuParams):
            raise InvalidArgument("ou must be OuParams")
        if not isinstance(self.grid, Grid):
            raise InvalidArgument("grid must be a Grid")
        if self.ou.mu != 0:
            raise InvalidArgument(f"the bandwidth model needs a zero-mean OU process, got mu={self.ou.mu}")
        object.__setattr__(self, "kprime", check_finite_scalar(self.kprime, "kprime"))
        eps = check_finite_scalar(self.epsilon, "epsilon")
        if not 0 <= eps < 0.25:
            raise InvalidArgument(f"epsilon must lie in [0, 0.25), got {eps}")
        n = self.traffic.n
        if 2 < n <= 3 and (4 - n) / 2 + eps >= 1:
            raise InvalidArgument(f"H + epsilon = {(4 - n) / 2 + eps} leaves the (1/2, 1) range")
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "burn_in", check_count(self.burn_in, "burn_in", minimum=0))


@dataclass(frozen=True)
class AggregateSpec:
    components: Sequence[BandwidthSpec]

    def __post_init__(self):
        components = tuple(self.components)
        if not components:
            raise InvalidArgument("an aggregate needs at least one component")
        _check_shared_grid(components)
        object.__setattr__(self, "components", components)


@dataclass(frozen=True)
class MultiserviceSpec:
    services: Mapping[str, BandwidthSpec] = field(default_factory=dict)

    def __post_init__(self):
        services = dict(self.services)
        if not services:
            raise InvalidArgument("a multiservice model needs at least one service")
        _check_shared_grid(tuple(services.values()))
        object.__setattr__(self, "services", services)


class BandwidthSample(NamedTuple):
    bandwidth: Trace
    ou_path: Trace
    traffic: np.ndarray
    increments: np.ndarray  # signed B_i * dS_i before the absolute value


def _check_shared_grid(specs):
    for spec in specs:
        if not isinstance(spec, BandwidthSpec):
            raise InvalidArgument(f"expected BandwidthSpec, got {type(spec).__name__}")
    grids = {spec.grid for spec in specs}
    if len(grids) > 1:
        raise InvalidArgument(f"components must share one grid, got {sorted(grids, key=repr)}")


def synthesize_with_factors(spec: BandwidthSpec, seed=None) -> BandwidthSample:
    """Like :func:`synthesize_bandwidth` but also return the OU path and traffic.

    The OU path and the traffic samples are drawn from two independent child
    streams of ``seed``; burn-in steps are dropped from all three outputs.
    """
    ou_seed, traffic_seed = spawn_seeds(seed, 2)
    steps = spec.grid.count + spec.burn_in
    path = ou_generate_path(spec.ou, Grid(spec.grid.dt, steps), ou_seed)
    traffic = generate_traffic_series(spec.traffic, steps, traffic_seed)
    increments = traffic * np.diff(path.values)
    start = spec.burn_in
    return BandwidthSample(
        Trace(spec.grid.dt, np.abs(increments[start:])),
        Trace(spec.grid.dt, path.values[start:]),
        traffic[start:],
        increments[start:],
    )


def synthesize_bandwidth(spec: BandwidthSpec, seed=None) -> Trace:
    """Generate ``spec.grid.count`` non-negative bandwidth increments."""
    return synthesize_with_factors(spec, seed).bandwidth


def _map_components(specs, seed, n_jobs):
    seeds = spawn_seeds(seed, len(specs))
    if n_jobs == 1 or len(specs) == 1:
        return [synthesize_bandwidth(s, ss) for s, ss in zip(specs, seeds)]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(synthesize_bandwidth, specs, seeds))


def synthesize_aggregate(spec: AggregateSpec, seed=None, *, n_jobs: int = 1,
                         return_components: bool = False):
    """Sum independently seeded component traces pointwise.

    Component ``i`` uses the ``i``-th child of ``seed`` (see
    :func:`numpy.random.SeedSequence.spawn`), so results do not depend on
    ``n_jobs``.
    """
    n_jobs = check_count(n_jobs, "n_jobs")
    traces = _map_components(spec.components, seed, n_jobs)
    total = traces[0].values.copy()
    for t in traces[1:]:
        total += t.values
    out = Trace(spec.components[0].grid.dt, total)
    return (out, traces) if return_components else out


def synthesize_multiservice(spec: MultiserviceSpec, seed=None, *, n_jobs: int = 1) -> dict[str, Trace]:
    """One independent bandwidth trace per named service, in insertion order."""
    n_jobs = check_count(n_jobs, "n_jobs")
    names = list(spec.services)
    traces = _map_components([spec.services[k] for k in names], seed, n_jobs)
    return dict(zip(names, traces))
