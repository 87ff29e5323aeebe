"""Fractional perfect matchings, their entropy, and the max-entropy solver.

A fractional perfect matching (fpm) assigns each edge a weight in [0, 1] so
that every vertex's incident weights sum to 1.  Its entropy is
``sum_e w[e] ln(1/w[e])`` in nats, with ``0 ln 0 = 0``.  The graph entropy
is the supremum of this over all fpms; it is computed here by iterative
proportional scaling on the vertex-edge incidence system, which is exact
coordinate ascent on the dual of the concave program

    max  sum_e x_e ln(1/x_e)   s.t.   sum_{e : v in e} x_e = 1,  x >= 0.

At the optimum the weights have the exponential-family form
``x_e = exp(sum_{v in e} lambda_v - 1)``; the solver maintains that form
throughout (every update is a per-vertex rescale of an exponential-family
point), so the dual potentials come out for free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InfeasibleError, InvalidArgumentError, ParseError
from .hypergraph import Hypergraph

DEFAULT_FEASIBILITY_TOL = 1e-8

# Below this a weight is treated as exactly zero in entropy terms.
ZERO_WEIGHT = 1e-300

STATUS_RAW = "raw"
STATUS_VERIFIED = "verified-fpm"


def weight_entropy(weights: np.ndarray) -> float:
    """sum w ln(1/w) in nats with the 0 ln 0 = 0 convention."""
    w = np.asarray(weights, dtype=float)
    if w.size and float(w.min()) < 0.0:
        raise InvalidArgumentError(f"negative weight {float(w.min())!r}")
    positive = w[w > ZERO_WEIGHT]
    return float(-(positive * np.log(positive)).sum())


@dataclass(frozen=True)
class EdgeWeights:
    """Edge weight vector aligned with a graph's edge order.

    ``status`` is ``"raw"`` until the vertex sums have been checked, then
    ``"verified-fpm"``.  The entropy is computed once at construction.
    """

    weights: np.ndarray
    graph_digest: str
    entropy: float
    status: str

    @classmethod
    def from_weights(cls, G: Hypergraph, weights, status: str = STATUS_RAW) -> "EdgeWeights":
        w = np.array(weights, dtype=float)
        if w.shape != (G.num_edges,):
            raise InvalidArgumentError(
                f"weight vector has length {w.size}, graph has {G.num_edges} edges"
            )
        if w.size:
            if not np.isfinite(w).all():
                raise InvalidArgumentError("weights must be finite")
            if float(w.min()) < 0.0:
                raise InvalidArgumentError(f"negative weight {float(w.min())!r}")
            if float(w.max()) > 1.0 + 1e-9:
                raise InvalidArgumentError(f"weight {float(w.max())!r} exceeds 1")
        w.flags.writeable = False
        return cls(w, G.digest(), weight_entropy(w), status)

    @property
    def verified(self) -> bool:
        return self.status == STATUS_VERIFIED


def entropy_of(x: EdgeWeights) -> float:
    """Entropy of the weight vector (cached at construction)."""
    return x.entropy


def check_alignment(G: Hypergraph, x: EdgeWeights) -> None:
    if x.weights.shape != (G.num_edges,):
        raise InvalidArgumentError("weights are not aligned with the graph's edge list")
    if x.graph_digest != G.digest():
        raise InvalidArgumentError("weights were built for a different graph (digest mismatch)")


def vertex_sums(G: Hypergraph, weights: np.ndarray) -> np.ndarray:
    sums = np.zeros(G.n, dtype=float)
    for i, e in enumerate(G.edges):
        for v in e:
            sums[v] += weights[i]
    return sums


@dataclass(frozen=True)
class FeasibilityCheck:
    ok: bool
    max_residual: float
    worst_vertex: int


def is_fractional_pm(G: Hypergraph, x: EdgeWeights, tol: float = DEFAULT_FEASIBILITY_TOL) -> FeasibilityCheck:
    """Whether every vertex's incident weight sums to 1 within tol."""
    check_alignment(G, x)
    residuals = np.abs(vertex_sums(G, x.weights) - 1.0)
    worst = int(residuals.argmax()) if G.n else 0
    worst_res = float(residuals[worst]) if G.n else 0.0
    return FeasibilityCheck(worst_res <= tol, worst_res, worst)


def as_verified(G: Hypergraph, x: EdgeWeights, tol: float = DEFAULT_FEASIBILITY_TOL) -> EdgeWeights:
    """Return x with verified status, or raise if it is not an fpm."""
    check = is_fractional_pm(G, x, tol)
    if not check.ok:
        raise InvalidArgumentError(
            f"not a fractional perfect matching: vertex {check.worst_vertex} "
            f"residual {check.max_residual:.3e} > {tol:.1e}"
        )
    return EdgeWeights(x.weights, x.graph_digest, x.entropy, STATUS_VERIFIED)


def well_distributed_factor(G: Hypergraph, x: EdgeWeights) -> float:
    """Least D >= 1 with 1/(D n^{k-1}) <= w[e] <= D/n^{k-1} for all edges.

    Infinity signals a zero weight.
    """
    check_alignment(G, x)
    w = x.weights
    if w.size == 0:
        return 1.0
    if float(w.min()) <= ZERO_WEIGHT:
        return math.inf
    scale = float(G.n) ** (G.k - 1)
    return max(float(w.max()) * scale, 1.0 / (float(w.min()) * scale), 1.0)


def jensen_bounds(G: Hypergraph, L: float) -> tuple[float, float]:
    """(upper, lower) entropy bounds for any fpm with all weights <= L.

    upper = (1 - 1/k) n ln n,  lower = (n/k) ln(n / (L^2 k |E|)).
    """
    if not L > 0:
        raise InvalidArgumentError(f"L must be positive, got {L}")
    n, k, m = G.n, G.k, G.num_edges
    upper = (1.0 - 1.0 / k) * n * math.log(n) if n > 0 else 0.0
    lower = (n / k) * math.log(n / (L * L * k * m)) if m > 0 else 0.0
    return upper, lower


# ---------------------------------------------------------------------------
# Proportional scaling core
# ---------------------------------------------------------------------------


@dataclass
class ScalingResult:
    x: np.ndarray
    potentials: np.ndarray
    iterations: int
    max_residual: float
    converged: bool
    fallback_used: bool


def scale_to_unit_sums(
    con_edges: Sequence[np.ndarray],
    con_coeffs: Sequence[np.ndarray],
    x0: np.ndarray,
    tol: float,
    max_iter: int,
    potential_cap: float,
    stall_window: int = 100,
    stall_ratio: float = 1e-3,
    damping: float = 0.5,
) -> ScalingResult:
    """Scale positive x0 so each constraint sum_e coeff*x[e] equals 1.

    Cyclic sweeps rescale the edges of one constraint at a time (exact
    coordinate ascent on the dual); if the residual stalls (relative drop
    below ``stall_ratio`` over ``stall_window`` sweeps), switches to damped
    simultaneous multiplicative updates.  The accumulated per-constraint
    log-scalings are returned as potentials; divergence beyond
    ``potential_cap`` is diagnosed as infeasibility.
    """
    x = np.array(x0, dtype=float)
    if x.size and float(x.min()) <= 0:
        raise InvalidArgumentError("scaling requires a strictly positive starting point")
    ncon = len(con_edges)
    mu = np.zeros(ncon, dtype=float)

    def all_sums() -> np.ndarray:
        return np.array([float(coeffs @ x[ids]) for ids, coeffs in zip(con_edges, con_coeffs)])

    history: list[float] = []
    fallback = False
    residual = math.inf
    sweeps = 0
    for sweeps in range(1, max_iter + 1):
        if not fallback:
            for j in range(ncon):
                ids, coeffs = con_edges[j], con_coeffs[j]
                s = float(coeffs @ x[ids])
                if s <= 0:
                    raise InfeasibleError(f"constraint {j} has no positive incident weight")
                x[ids] /= s
                mu[j] -= math.log(s)
        else:
            sums = all_sums()
            if float(sums.min()) <= 0:
                raise InfeasibleError("a constraint lost all incident weight")
            step = -damping * np.log(sums)
            mu += step
            for j in range(ncon):
                x[con_edges[j]] *= math.exp(step[j])
        sums = all_sums()
        residual = float(np.abs(sums - 1.0).max()) if ncon else 0.0
        if residual <= tol:
            return ScalingResult(x, mu, sweeps, residual, True, fallback)
        if float(np.abs(mu).max()) > potential_cap:
            raise InfeasibleError(
                f"diverging potentials (|mu| > {potential_cap:.3g}); "
                "no fractional perfect matching on this support"
            )
        history.append(residual)
        if not fallback and len(history) > stall_window:
            old = history[-stall_window - 1]
            if residual > old * (1.0 - stall_ratio):
                fallback = True
    return ScalingResult(x, mu, sweeps, residual, False, fallback)


@dataclass(frozen=True)
class SolverReport:
    iterations: int
    max_residual: float
    entropy: float
    converged: bool
    potentials: np.ndarray


def max_entropy_fpm(
    G: Hypergraph,
    tol: float = DEFAULT_FEASIBILITY_TOL,
    max_iter: int = 20000,
) -> tuple[EdgeWeights, SolverReport]:
    """Entropy-maximising fractional perfect matching of G.

    Starts from the uniform positive vector x_e = n/(k |E|) and scales
    vertex sums to 1.  The report carries the dual potentials lambda_v; at
    convergence ``x_e = exp(sum_{v in e} lambda_v - 1)`` up to rounding.
    Raises InfeasibleError for graphs with an uncovered vertex or diverging
    potentials; returns converged=False when the iteration budget runs out.
    """
    if not tol > 0 or max_iter < 1:
        raise InvalidArgumentError(f"need tol > 0 and max_iter >= 1, got {tol}, {max_iter}")
    if G.n == 0:
        empty = EdgeWeights.from_weights(G, np.zeros(0), STATUS_VERIFIED)
        return empty, SolverReport(0, 0.0, 0.0, True, np.zeros(0))
    for v in range(G.n):
        if not G.incident(v):
            raise InfeasibleError(f"vertex {v} has no incident edge")
    m = G.num_edges
    x0_value = G.n / (G.k * m)
    con_edges = [np.array(G.incident(v), dtype=np.intp) for v in range(G.n)]
    con_coeffs = [np.ones(len(ids)) for ids in con_edges]
    cap = 1e3 * math.log(max(G.n, 3))
    result = scale_to_unit_sums(
        con_edges, con_coeffs, np.full(m, x0_value), tol, max_iter, potential_cap=cap
    )
    # Shift the accumulated scalings into true dual potentials:
    # x_e = x0 * prod_v exp(mu_v) = exp(sum_v lambda_v - 1) with the shift below.
    lam = result.potentials + (1.0 + math.log(x0_value)) / G.k
    status = STATUS_VERIFIED if result.converged and result.max_residual <= tol else STATUS_RAW
    x = EdgeWeights.from_weights(G, np.minimum(result.x, 1.0), status)
    report = SolverReport(result.iterations, result.max_residual, x.entropy, result.converged, lam)
    return x, report


def convex_combine(x1: EdgeWeights, x2: EdgeWeights, t: float) -> EdgeWeights:
    """(1-t) x1 + t x2; entropy is concave so the mixture's entropy dominates."""
    if not 0.0 <= t <= 1.0:
        raise InvalidArgumentError(f"t={t} outside [0, 1]")
    if x1.graph_digest != x2.graph_digest or x1.weights.shape != x2.weights.shape:
        raise InvalidArgumentError("cannot combine weights from different graphs")
    if not (x1.verified and x2.verified):
        raise InvalidArgumentError("convex_combine requires verified fractional perfect matchings")
    w = (1.0 - t) * x1.weights + t * x2.weights
    w = np.minimum(w, 1.0)
    w.flags.writeable = False
    return EdgeWeights(w, x1.graph_digest, weight_entropy(w), STATUS_VERIFIED)


# ---------------------------------------------------------------------------
# Weights file I/O (.wts): one decimal weight per line in edge-id order,
# header comment records the source graph digest.
# ---------------------------------------------------------------------------


def write_weights(path: str, x: EdgeWeights, extra_comments: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# graph {x.graph_digest}\n")
        fh.write(f"# status {x.status}\n")
        for comment in extra_comments:
            fh.write(f"# {comment}\n")
        for w in x.weights:
            fh.write(f"{w:.17g}\n")


def read_weights(path: str, G: Optional[Hypergraph] = None) -> EdgeWeights:
    """Read a .wts file; if G is given, checks digest and length against it."""
    digest = None
    status = STATUS_RAW
    values: list[float] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                fields = line[1:].split()
                if len(fields) == 2 and fields[0] == "graph":
                    digest = fields[1]
                elif len(fields) == 2 and fields[0] == "status":
                    status = fields[1]
                continue
            try:
                values.append(float(line))
            except ValueError:
                raise ParseError("not a decimal weight", path, lineno)
    w = np.array(values, dtype=float)
    if G is not None:
        if digest is not None and digest != G.digest():
            raise InvalidArgumentError(f"weights file {path} was written for a different graph")
        return EdgeWeights.from_weights(G, w, status if status == STATUS_VERIFIED else STATUS_RAW)
    if w.size and (float(w.min()) < 0 or float(w.max()) > 1.0 + 1e-9):
        raise ParseError("weights outside [0, 1]", path, 0)
    w.flags.writeable = False
    return EdgeWeights(w, digest or "", weight_entropy(w), status)
