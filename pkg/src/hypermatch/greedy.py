"""The weighted random greedy matching process and its trajectory statistics.

Guided by a fractional perfect matching x, the process repeatedly picks an
edge with probability proportional to x among the edges of the current
residual graph, then deletes the picked edge's vertices.  With
p(i) = (n/k - i)/(n/k) the fraction of surviving vertices after i steps,
the tracked statistics are anticipated to follow

    residual weight   ~ p(i)^k (n/k)
    residual entropy  ~ p(i)^k h(x)
    deg(S) in G(i)    ~ p(i)^{k-|S|} deg_G(S)

and ``trajectory_deviation`` measures how far a run strays from those
centers.  ``sample_pm_via_greedy`` turns the process into a perfect-matching
sampler by stopping at a prescribed fraction and completing the remainder
exactly (via the counting oracle), restarting on dead ends.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from math import comb
from typing import Iterable, Optional, Sequence

import numpy as np

from .counting import DEFAULT_COUNT_CAP, PMOracle
from .entropy import EdgeWeights, check_alignment
from .errors import InvalidArgumentError, SamplingError
from .hypergraph import Hypergraph, degree
from .seeds import rng_from

STOP_FROZEN = "no-positive-weight-edge"
STOP_LIMIT = "step-limit"


@dataclass(frozen=True)
class TrajectoryConfig:
    """Tracking and stopping policy for greedy runs.

    ``stop_fraction`` of n/k caps the number of steps (None runs to the
    freeze, i.e. until no positive-weight edge remains).  Tracked sets
    default to all singletons plus ``sampled_sets_per_size`` random sets of
    each size 2..k-1, drawn from stream (tracking_seed, size).
    """

    c: float = 0.05
    stop_fraction: Optional[float] = None
    track_singletons: bool = True
    sampled_sets_per_size: int = 100
    tracking_seed: int = 0
    tracked_sets: Optional[tuple[tuple[int, ...], ...]] = None

    def __post_init__(self):
        if not 0.0 < self.c < 1.0:
            raise InvalidArgumentError(f"trajectory exponent c={self.c} outside (0, 1)")
        if self.stop_fraction is not None and not 0.0 < self.stop_fraction <= 1.0:
            raise InvalidArgumentError(f"stop_fraction={self.stop_fraction} outside (0, 1]")

    def to_dict(self) -> dict:
        return {
            "c": self.c,
            "stop_fraction": self.stop_fraction,
            "track_singletons": self.track_singletons,
            "sampled_sets_per_size": self.sampled_sets_per_size,
            "tracking_seed": self.tracking_seed,
            "tracked_sets": None if self.tracked_sets is None else [list(s) for s in self.tracked_sets],
        }


def concentration_horizon(n: int, k: int, c: float) -> float:
    """(1 - n^{-c}) n/k, the step range the concentration statement covers."""
    return (1.0 - float(n) ** (-c)) * n / k


@lru_cache(maxsize=16)
def _graph_arrays(G: Hypergraph) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(edge-vertex matrix, incidence indptr, flat incidence) as numpy arrays."""
    m = G.num_edges
    edge_verts = np.array(G.edges, dtype=np.intp).reshape(m, G.k)
    indptr = np.zeros(G.n + 1, dtype=np.intp)
    for v in range(G.n):
        indptr[v + 1] = indptr[v] + len(G.incident(v))
    flat = (
        np.concatenate([np.array(G.incident(v), dtype=np.intp) for v in range(G.n)])
        if m
        else np.zeros(0, dtype=np.intp)
    )
    for arr in (edge_verts, indptr, flat):
        arr.flags.writeable = False
    return edge_verts, indptr, flat


def resolve_tracked_sets(G: Hypergraph, cfg: TrajectoryConfig) -> tuple[tuple[int, ...], ...]:
    """The tracked vertex sets for a run, deterministic given the config."""
    if cfg.tracked_sets is not None:
        return tuple(tuple(sorted(s)) for s in cfg.tracked_sets)
    sets: list[tuple[int, ...]] = []
    if cfg.track_singletons:
        sets.extend((v,) for v in range(G.n))
    for size in range(2, G.k):
        quota = min(cfg.sampled_sets_per_size, comb(G.n, size))
        if quota == comb(G.n, size):
            sets.extend(itertools.combinations(range(G.n), size))
            continue
        rng = rng_from(cfg.tracking_seed, size)
        chosen: set[tuple[int, ...]] = set()
        while len(chosen) < quota:
            s = tuple(sorted(int(v) for v in rng.choice(G.n, size=size, replace=False)))
            chosen.add(s)
        sets.extend(sorted(chosen))
    return tuple(sets)


@dataclass
class GreedyTrajectory:
    """Per-step record of one run; index i means "after i steps"."""

    graph_digest: str
    seed: int
    stream: tuple[int, ...]
    config: TrajectoryConfig
    tracked_sets: tuple[tuple[int, ...], ...]
    chosen: np.ndarray
    step_logprob: np.ndarray
    residual_weight: np.ndarray
    residual_entropy: np.ndarray
    alive_vertices: np.ndarray
    tracked_degrees: np.ndarray  # shape (steps+1, n_sets); NaN once the set loses a vertex
    stop_reason: str

    @property
    def steps(self) -> int:
        return int(self.chosen.size)


def run_greedy(
    G: Hypergraph,
    x: EdgeWeights,
    cfg: TrajectoryConfig,
    seed: int,
    stream: tuple[int, ...] = (),
) -> GreedyTrajectory:
    """Simulate the process; stream (seed, *stream) draws one uniform per step.

    Each step builds the cumulative weights of the surviving edges and picks
    by inverse transform, then deletes every edge meeting the picked edge's
    vertices.  Freezes when no positive weight survives.
    """
    check_alignment(G, x)
    if not x.verified:
        raise InvalidArgumentError("run_greedy requires a verified fractional perfect matching")
    n, k, m = G.n, G.k, G.num_edges
    rng = rng_from(seed, *stream)
    tracked = resolve_tracked_sets(G, cfg)
    edge_verts, indptr, flat = _graph_arrays(G)

    w = x.weights.astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = np.where(w > 0, -w * np.log(np.where(w > 0, w, 1.0)), 0.0)
    w_alive = w.copy()
    alive_e = np.ones(m, dtype=bool)
    alive_v = np.ones(n, dtype=bool)

    # Singleton degrees are maintained by decrement; larger tracked sets are
    # recomputed from their (precomputed) incident edge lists at each record.
    deg_v = np.array([len(G.incident(v)) for v in range(n)], dtype=float)
    big_sets = [(idx, S) for idx, S in enumerate(tracked) if len(S) > 1]
    big_edges = {}
    for idx, S in big_sets:
        ids = set(G.incident(S[0]))
        for v in S[1:]:
            ids.intersection_update(G.incident(v))
        big_edges[idx] = np.array(sorted(ids), dtype=np.intp)

    max_steps = n // k
    if cfg.stop_fraction is not None:
        max_steps = min(max_steps, int(math.floor(cfg.stop_fraction * n / k + 1e-9)))

    chosen: list[int] = []
    logprobs: list[float] = []
    rows_w: list[float] = []
    rows_e: list[float] = []
    rows_alive: list[int] = []
    rows_deg: list[np.ndarray] = []

    def record() -> None:
        rows_w.append(float(w_alive.sum()))
        rows_e.append(float(ent[alive_e].sum()))
        rows_alive.append(int(alive_v.sum()))
        degs = np.full(len(tracked), np.nan)
        for idx, S in enumerate(tracked):
            if len(S) == 1:
                if alive_v[S[0]]:
                    degs[idx] = deg_v[S[0]]
            elif all(alive_v[v] for v in S):
                degs[idx] = float(alive_e[big_edges[idx]].sum())
        rows_deg.append(degs)

    record()
    stop_reason = STOP_FROZEN
    while len(chosen) < max_steps:
        cumulative = np.cumsum(w_alive)
        total = float(cumulative[-1]) if m else 0.0
        if total <= 0.0:
            stop_reason = STOP_FROZEN
            break
        r = rng.random() * total
        pick = int(np.searchsorted(cumulative, r, side="right"))
        while pick < m and (not alive_e[pick] or w[pick] <= 0.0):
            pick += 1
        if pick >= m:
            pick = int(np.nonzero(alive_e & (w > 0))[0][-1])
        logprobs.append(math.log(w[pick] / total))
        chosen.append(pick)
        verts = edge_verts[pick]
        cand = np.concatenate([flat[indptr[v]: indptr[v + 1]] for v in verts])
        newly = np.unique(cand[alive_e[cand]])
        alive_e[newly] = False
        w_alive[newly] = 0.0
        np.add.at(deg_v, edge_verts[newly].ravel(), -1.0)
        alive_v[verts] = False
        record()
    else:
        stop_reason = STOP_LIMIT if int(alive_e.sum()) and float(w_alive.sum()) > 0 else STOP_FROZEN

    return GreedyTrajectory(
        graph_digest=G.digest(),
        seed=seed,
        stream=tuple(stream),
        config=cfg,
        tracked_sets=tracked,
        chosen=np.array(chosen, dtype=np.intp),
        step_logprob=np.array(logprobs),
        residual_weight=np.array(rows_w),
        residual_entropy=np.array(rows_e),
        alive_vertices=np.array(rows_alive, dtype=np.intp),
        tracked_degrees=np.array(rows_deg),
        stop_reason=stop_reason,
    )


def predicted_stats(
    G: Hypergraph,
    x: EdgeWeights,
    i: int,
    tracked_sets: Iterable[tuple[int, ...]] = (),
) -> tuple[float, float, dict[tuple[int, ...], float]]:
    """Anticipated (weight, entropy, deg(S)) centers after i steps."""
    if not 0 <= i <= G.n // G.k:
        raise InvalidArgumentError(f"step {i} outside [0, {G.n // G.k}]")
    steps_total = G.n / G.k
    p = (steps_total - i) / steps_total
    weight = p**G.k * steps_total
    entropy = p**G.k * x.entropy
    degrees = {
        tuple(S): p ** (G.k - len(S)) * degree(G, S) for S in (tuple(s) for s in tracked_sets)
    }
    return weight, entropy, degrees


def trajectory_deviation(
    traj: GreedyTrajectory,
    G: Hypergraph,
    x: EdgeWeights,
    horizon_fraction: Optional[float] = None,
) -> dict:
    """Relative deviations of a trajectory from its predicted centers.

    The summary maximises over steps i <= horizon, where the horizon
    defaults to the concentration range (1 - n^{-c}) n/k.  Degree deviations
    are measured only while the tracked set is fully alive.
    """
    check_alignment(G, x)
    if traj.graph_digest != G.digest():
        raise InvalidArgumentError("trajectory was recorded on a different graph")
    n, k = G.n, G.k
    steps_total = n / k
    horizon = (
        concentration_horizon(n, k, traj.config.c)
        if horizon_fraction is None
        else horizon_fraction * steps_total
    )
    i_max = min(traj.steps, int(math.floor(horizon + 1e-9)))
    idx = np.arange(i_max + 1)
    p = (steps_total - idx) / steps_total
    pred_w = p**k * steps_total
    pred_e = p**k * x.entropy
    obs_w = traj.residual_weight[: i_max + 1]
    obs_e = traj.residual_entropy[: i_max + 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        dev_w = np.where(pred_w > 0, np.abs(obs_w - pred_w) / pred_w, np.inf)
        dev_e = np.where(pred_e > 0, np.abs(obs_e - pred_e) / pred_e, np.inf)
    deg_devs = []
    for s_idx, S in enumerate(traj.tracked_sets):
        deg0 = degree(G, S)
        if deg0 <= 0:
            continue
        pred_d = p ** (k - len(S)) * deg0
        obs_d = traj.tracked_degrees[: i_max + 1, s_idx]
        ok = ~np.isnan(obs_d) & (pred_d > 0)
        if ok.any():
            deg_devs.append(float(np.max(np.abs(obs_d[ok] - pred_d[ok]) / pred_d[ok])))
    return {
        "horizon_steps": i_max,
        "reached_horizon": bool(traj.steps >= math.floor(horizon)),
        "ran_to": traj.steps,
        "stop_reason": traj.stop_reason,
        "max_weight_deviation": float(dev_w.max()) if dev_w.size else 0.0,
        "max_entropy_deviation": float(dev_e.max()) if dev_e.size else 0.0,
        "max_degree_deviation": max(deg_devs) if deg_devs else 0.0,
        "weight_deviation_per_step": [float(d) for d in dev_w],
        "entropy_deviation_per_step": [float(d) for d in dev_e],
    }


def complete_to_pm(
    G: Hypergraph, partial: Sequence[int], cap: int = DEFAULT_COUNT_CAP
) -> Optional[tuple[int, ...]]:
    """Deterministic completion of disjoint edges to a perfect matching.

    Walks the counting oracle: at each lowest unmatched vertex take the
    first edge (in id order) from which a completion still exists.  Returns
    None when the partial matching cannot be completed.
    """
    oracle = PMOracle(G, cap)
    mask = 0
    for eid in partial:
        emask = oracle.edge_masks[eid]
        if emask & mask:
            raise InvalidArgumentError("partial matching has overlapping edges")
        mask |= emask
    if G.n % G.k != 0 or oracle.count(mask) == 0:
        return None
    completion: list[int] = []
    while mask != oracle.full_mask:
        free = ~mask & oracle.full_mask
        v = (free & -free).bit_length() - 1
        for eid, emask in oracle.by_vertex[v]:
            if emask & mask == 0 and oracle.count(mask | emask) > 0:
                completion.append(eid)
                mask |= emask
                break
    return tuple(partial) + tuple(completion)


def sample_pm_via_greedy(
    G: Hypergraph,
    x: EdgeWeights,
    seed: int,
    max_restarts: int = 20,
    cfg: Optional[TrajectoryConfig] = None,
    cap: int = DEFAULT_COUNT_CAP,
) -> tuple[tuple[int, ...], np.ndarray]:
    """Perfect matching from a greedy prefix plus exact completion.

    Restart r runs the greedy on stream (seed, r); the prefix stops at the
    concentration horizon (1 - n^{-c}) n/k by default and the remainder is
    completed through the counting oracle.  Returns the matching's edge ids
    and the per-step log-probabilities of the greedy choices.
    """
    if cfg is None:
        cfg = TrajectoryConfig(
            stop_fraction=max(1.0 - float(G.n) ** (-0.05), 1e-6),
            track_singletons=False,
            sampled_sets_per_size=0,
        )
    for restart in range(max_restarts):
        traj = run_greedy(G, x, cfg, seed, stream=(restart,))
        full = complete_to_pm(G, [int(e) for e in traj.chosen], cap)
        if full is not None:
            return full, traj.step_logprob
    raise SamplingError(f"no completable greedy prefix within {max_restarts} restarts")


# ---------------------------------------------------------------------------
# Trajectory CSV + metadata sidecar
# ---------------------------------------------------------------------------


def write_trajectory_csv(
    path: str,
    traj: GreedyTrajectory,
    G: Hypergraph,
    x: EdgeWeights,
    header_comments: Sequence[str] = (),
) -> None:
    """Columns: i, chosen_edge, residual/predicted weight and entropy, then
    one degree column per tracked set id."""
    n, k = G.n, G.k
    steps_total = n / k
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for comment in header_comments:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["i", "chosen_edge", "residual_weight", "predicted_weight",
             "residual_entropy", "predicted_entropy"]
            + [f"deg_S{idx}" for idx in range(len(traj.tracked_sets))]
        )
        for i in range(traj.steps + 1):
            p = (steps_total - i) / steps_total
            degs = [
                "nan" if np.isnan(d) else repr(float(d)) for d in traj.tracked_degrees[i]
            ]
            writer.writerow(
                [
                    i,
                    "" if i == 0 else int(traj.chosen[i - 1]),
                    repr(float(traj.residual_weight[i])),
                    repr(p**k * steps_total),
                    repr(float(traj.residual_entropy[i])),
                    repr(p**k * x.entropy),
                ]
                + degs
            )


def write_trajectory_metadata(path: str, traj: GreedyTrajectory, extra: Optional[dict] = None) -> None:
    meta = {
        "graph_digest": traj.graph_digest,
        "seed": traj.seed,
        "stream": list(traj.stream),
        "config": traj.config.to_dict(),
        "tracked_sets": [list(s) for s in traj.tracked_sets],
        "steps": traj.steps,
        "stop_reason": traj.stop_reason,
    }
    if extra:
        meta.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
