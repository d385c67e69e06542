"""Discrete RIS phase-shift selection by block coordinate descent.

Each of the M surface elements picks one phase from the uniform alphabet
Omega = {0, 2*pi/Q, ..., 2*pi*(Q-1)/Q}. The objective is the sum of the
scheduled devices' achievable rates for the current node geometry. BCD sweeps
the elements in ascending order and sets each one to the exhaustive argmax of
the objective with the other elements held fixed; a sweep that changes nothing
ends the descent. An exhaustive search over all Q**M configurations doubles as
a small-instance optimality oracle.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import direct_amplitude, cascade_coefficients, ris_device_channel, ris_uav_channel

BRUTE_FORCE_LIMIT = 1_000_000  # refuse exhaustive search beyond this many configs
DEFAULT_MAX_SWEEPS = 20


@dataclass(frozen=True)
class PhaseConfig:
    """Discrete phase choice per element: phase m = 2*pi*indices[m]/num_phases."""

    indices: tuple
    num_phases: int

    def __post_init__(self):
        if self.num_phases < 2:
            raise ValueError("num_phases must be >= 2")
        if any(not 0 <= k < self.num_phases for k in self.indices):
            raise ValueError("phase indices must lie in [0, num_phases)")

    @property
    def phases(self):
        return 2.0 * math.pi * np.asarray(self.indices, dtype=float) / self.num_phases

    def __len__(self):
        return len(self.indices)


@dataclass
class DeviceLink:
    """Everything the objective needs about one scheduled device: the direct
    term and the per-element cascaded coefficients for the current geometry."""

    direct: float
    cascade: np.ndarray


def build_links(sched, geometry, params):
    """Precompute DeviceLink entries for the scheduled device indices."""
    links = []
    m = params.num_elements
    h_ru = ris_uav_channel(geometry.uav, geometry.ris, params) if m else np.zeros(0)
    for i in sched:
        dev = geometry.devices[i]
        d = direct_amplitude(geometry.uav, dev, params)
        if m:
            h_ri = ris_device_channel(geometry.ris, dev, params)
            casc = cascade_coefficients(h_ru, h_ri)
        else:
            casc = np.zeros(0, dtype=complex)
        links.append(DeviceLink(d, casc))
    return links


def _composites(links, phases):
    phasors = np.exp(1j * phases)
    return np.array([lk.direct + lk.cascade @ phasors for lk in links])


def _objective_from_composites(comps, params):
    gain_sq = np.abs(comps) ** 2
    return float(np.sum(np.log2(1.0 + params.tx_power * gain_sq / params.sigma2)))


def sum_rate_links(theta, links, params):
    if len(links) == 0:
        return 0.0
    return _objective_from_composites(_composites(links, theta.phases), params)


def sum_rate(theta, sched, geometry, params):
    """Sum of scheduled devices' rates (bits per slot) under phase config theta."""
    sched = tuple(sched)
    if len(theta) != params.num_elements:
        raise ValueError("phase config length must equal the element count")
    return sum_rate_links(theta, build_links(sched, geometry, params), params)


def _bcd_run(links, params, start, max_sweeps):
    """One coordinate descent from the given starting indices.

    Returns (indices, objective, trace) where trace holds the objective after
    every accepted per-element update. The per-element scan keeps the current
    phase on ties and otherwise takes the smallest maximizing index, so the
    objective sequence is nondecreasing by construction.
    """
    q = params.num_phases
    m = params.num_elements
    idx = np.array(start, dtype=int)
    alphabet = 2.0 * math.pi * np.arange(q) / q
    cand_phasors = np.exp(1j * alphabet)  # (Q,)
    kappa = params.tx_power / params.sigma2

    casc = np.array([lk.cascade for lk in links])  # (S, M)
    direct = np.array([lk.direct for lk in links], dtype=complex)  # (S,)
    comps = direct + casc @ np.exp(1j * alphabet[idx])  # (S,)
    cur_obj = _objective_from_composites(comps, params)
    trace = [cur_obj]

    for _ in range(max_sweeps):
        changed = False
        for elem in range(m):
            col = casc[:, elem]  # (S,)
            base = comps - col * cand_phasors[idx[elem]]
            # candidate composites for all Q phases at once: (Q, S)
            cand = base[None, :] + np.outer(cand_phasors, col)
            obj = np.sum(np.log2(1.0 + kappa * np.abs(cand) ** 2), axis=1)
            best = obj.max()
            if obj[idx[elem]] == best or best <= cur_obj:
                continue  # ties never displace the current phase
            new = int(np.argmax(obj))  # smallest index among maximizers
            idx[elem] = new
            comps = base + col * cand_phasors[new]
            cur_obj = float(best)
            trace.append(cur_obj)
            changed = True
        # recompute from scratch once per sweep so incremental drift cannot build up
        comps = direct + casc @ np.exp(1j * alphabet[idx])
        if not changed:
            break
    return idx, _objective_from_composites(comps, params), trace


def bcd_optimize(sched, geometry, params, max_sweeps=DEFAULT_MAX_SWEEPS,
                 restarts=1, seed=None, return_trace=False):
    """Block coordinate descent over the discrete phase alphabet.

    The first start is all-zero indices; additional restarts draw uniform
    random indices from a generator seeded with `seed`, and the best run by
    objective wins (earlier run kept on ties). Deterministic for a fixed seed.
    """
    sched = tuple(sched)
    m, q = params.num_elements, params.num_phases
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    if m == 0 or len(sched) == 0:
        cfg = PhaseConfig(tuple([0] * m), q)
        return (cfg, [sum_rate(cfg, sched, geometry, params)]) if return_trace else cfg

    links = build_links(sched, geometry, params)
    rng = np.random.default_rng(seed)
    starts = [np.zeros(m, dtype=int)]
    starts += [rng.integers(0, q, size=m) for _ in range(restarts - 1)]

    best = None
    for start in starts:
        idx, obj, trace = _bcd_run(links, params, start, max_sweeps)
        if best is None or obj > best[1]:
            best = (idx, obj, trace)
    cfg = PhaseConfig(tuple(int(k) for k in best[0]), q)
    return (cfg, best[2]) if return_trace else cfg


def brute_force_optimize(sched, geometry, params):
    """Exhaustive search over all Q**M phase configurations.

    Ties resolve to the lexicographically smallest index tuple. Refuses to run
    when Q**M exceeds BRUTE_FORCE_LIMIT.
    """
    sched = tuple(sched)
    m, q = params.num_elements, params.num_phases
    if q ** m > BRUTE_FORCE_LIMIT:
        raise ValueError(f"search space {q}**{m} exceeds {BRUTE_FORCE_LIMIT}")
    if m == 0 or len(sched) == 0:
        return PhaseConfig(tuple([0] * m), q)

    links = build_links(sched, geometry, params)
    casc = np.array([lk.cascade for lk in links])
    direct = np.array([lk.direct for lk in links], dtype=complex)
    kappa = params.tx_power / params.sigma2
    phasor = np.exp(2j * math.pi * np.arange(q) / q)

    best_idx, best_obj = None, -math.inf
    chunk = []
    chunk_size = 4096

    def flush(chunk, best_idx, best_obj):
        arr = np.array(chunk)  # (B, M) ints in lexicographic order
        comps = direct[None, :] + phasor[arr] @ casc.T  # (B, S)
        obj = np.sum(np.log2(1.0 + kappa * np.abs(comps) ** 2), axis=1)
        k = int(np.argmax(obj))  # first max in the chunk = lexicographically first
        if obj[k] > best_obj:
            return tuple(chunk[k]), float(obj[k])
        return best_idx, best_obj

    for combo in itertools.product(range(q), repeat=m):
        chunk.append(combo)
        if len(chunk) == chunk_size:
            best_idx, best_obj = flush(chunk, best_idx, best_obj)
            chunk = []
    if chunk:
        best_idx, best_obj = flush(chunk, best_idx, best_obj)
    return PhaseConfig(best_idx, q)
