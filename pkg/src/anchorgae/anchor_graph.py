"""Sample-to-anchor bipartite graph estimation.

Each sample i carries a k-sparse connectivity distribution over the m
anchors, obtained in closed form from its squared distances to the anchors:
the k nearest anchors receive weight proportional to how far inside the
(k+1)-th distance they sit, so the row is automatically normalized and the
sparsity level k is the only hyper-parameter. Anchors are then pulled to the
weighted mean of their assigned samples, and the two steps alternate until
the regularized transport objective stops improving.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .numerics import as_matrix, pairwise_sq_dist

# Column sums below this are treated as a dead anchor.
DEAD_ANCHOR_TOL = 1e-12


@dataclass
class AnchorGraph:
    """k-sparse row-stochastic bipartite graph B (n x m) in fixed-width CSR form.

    indices[i] holds the k anchor ids of row i (ascending distance order),
    weights[i] the matching probabilities (sum 1). delta is the vector of
    anchor degrees (column sums of B) and anchors the anchor coordinates in
    the space B was fitted in.
    """

    indices: np.ndarray
    weights: np.ndarray
    delta: np.ndarray
    anchors: np.ndarray
    m: int
    _csr: sp.csr_matrix | None = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.indices.shape[0]

    @property
    def k(self) -> int:
        return self.indices.shape[1]

    def csr(self) -> sp.csr_matrix:
        """Sparse view of B, cached; used for all products against B."""
        if self._csr is None:
            n, k = self.indices.shape
            indptr = np.arange(0, (n + 1) * k, k, dtype=np.int64)
            self._csr = sp.csr_matrix(
                (self.weights.ravel(), self.indices.ravel().astype(np.int64), indptr),
                shape=(n, self.m),
            )
        return self._csr

    def b_dot(self, y: np.ndarray) -> np.ndarray:
        """B @ y for y of shape (m, d); O(n k d)."""
        return self.csr() @ y

    def bt_dot(self, x: np.ndarray) -> np.ndarray:
        """B^T @ x for x of shape (n, d); O(n k d)."""
        return self.csr().T @ x

    def to_dense(self) -> np.ndarray:
        """Dense n x m copy of B. Test/diagnostic scale only."""
        return self.csr().toarray()


def from_rows(indices: np.ndarray, weights: np.ndarray, anchors: np.ndarray,
              m: int) -> AnchorGraph:
    """Assemble an AnchorGraph from per-row support/weight arrays."""
    delta = np.bincount(indices.ravel(), weights=weights.ravel(), minlength=m)
    return AnchorGraph(indices=indices, weights=weights, delta=delta,
                       anchors=anchors, m=m)


@dataclass
class ConnectivitySolveConfig:
    """Settings for the alternating fit: per-row sparsity k, iteration cap,
    and the relative objective-change threshold that stops the loop."""

    k: int
    max_iters: int = 30
    tol: float = 1e-6

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"sparsity k must be >= 1, got {self.k}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.tol <= 0:
            raise ValueError(f"tol must be positive, got {self.tol}")


def init_anchors(x: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    """m distinct data rows, sampled without replacement."""
    x = as_matrix(x, "x")
    n = x.shape[0]
    if not (1 <= m <= n):
        raise ValueError(f"need 1 <= m <= n={n}, got m={m}")
    picks = rng.choice(n, size=m, replace=False)
    return x[picks].copy()


def _solve_rows(dists: np.ndarray, k: int, uniform: bool = False):
    """Closed-form k-sparse rows for a whole distance matrix (n x m).

    Returns (indices (n,k), weights (n,k), gamma (n,)). Ties are broken by
    ascending anchor index (stable sort); a zero denominator (the k+1
    nearest all at equal distance) falls back to the uniform 1/k row, which
    is the limit of the formula under a vanishing perturbation. gamma is
    half the denominator, the implied per-row regularizer weight.
    """
    n, m = dists.shape
    if not (1 <= k < m):
        raise ValueError(f"need 1 <= k < m={m}, got k={k}")
    order = np.argsort(dists, axis=1, kind="stable")
    support = order[:, :k]
    d_sup = np.take_along_axis(dists, support, axis=1)
    d_bound = np.take_along_axis(dists, order[:, k:k + 1], axis=1)
    num = d_bound - d_sup
    den = num.sum(axis=1, keepdims=True)
    degenerate = den <= 0.0
    if uniform:
        weights = np.full((n, k), 1.0 / k)
    else:
        safe_den = np.where(degenerate, 1.0, den)
        weights = np.where(degenerate, 1.0 / k, num / safe_den)
    return support, weights, 0.5 * den[:, 0]


def solve_connectivity_row(dists: np.ndarray, k: int) -> np.ndarray:
    """Connectivity distribution of one sample as a dense length-m row."""
    dists = np.asarray(dists, dtype=np.float64)
    if dists.ndim != 1:
        raise ValueError(f"dists must be a vector, got shape {dists.shape}")
    if not np.all(np.isfinite(dists)) or np.any(dists < 0):
        raise ValueError("dists must be finite and nonnegative")
    support, weights, _ = _solve_rows(dists[None, :], k)
    row = np.zeros(dists.shape[0])
    row[support[0]] = weights[0]
    return row


def update_anchors(x_mapped: np.ndarray, g: AnchorGraph) -> np.ndarray:
    """Each anchor moves to the B-weighted mean of the samples: row j of the
    result is sum_i b_ij x_i / delta_j."""
    if np.any(g.delta <= DEAD_ANCHOR_TOL):
        dead = np.flatnonzero(g.delta <= DEAD_ANCHOR_TOL)
        raise ValueError(f"anchors {dead.tolist()} have zero degree")
    return g.bt_dot(x_mapped) / g.delta[:, None]


def _objective(d_sup, weights, gamma, m: int) -> float:
    """Regularized transport objective for the rows just solved.

    sum_i [ sum_l w_il d_il + gamma_i * sum_j (p_ij - 1/m)^2 ], where the
    second sum runs over all m anchors (the m - k off-support entries each
    contribute 1/m^2).
    """
    k = weights.shape[1]
    fit = float(np.sum(weights * d_sup))
    dev = np.sum((weights - 1.0 / m) ** 2, axis=1) + (m - k) / m ** 2
    return fit + float(np.dot(gamma, dev))


def _reseed_dead_anchors(x, anchors, dists, dead: np.ndarray) -> None:
    """Move each dead anchor onto the sample farthest from its nearest
    anchor; keeps m fixed and every degree positive. In place."""
    nearest = dists.min(axis=1)
    order = np.argsort(nearest, kind="stable")[::-1]
    picks = order[: dead.size]
    anchors[dead] = x[picks]
    new_d = pairwise_sq_dist(x, anchors[dead])
    dists[:, dead] = new_d


def fit_anchor_graph(x_mapped: np.ndarray, anchors0: np.ndarray,
                     cfg: ConnectivitySolveConfig, uniform_rows: bool = False,
                     history: list | None = None) -> AnchorGraph:
    """Alternate row solves and anchor updates until the objective settles.

    anchors0 is the starting anchor set in the same space as x_mapped (warm
    start). The tracked objective is the regularized transport value each
    row solve actually minimized, evaluated at the distances it saw. Both
    half-steps are individually optimal (row solve given distances, anchor
    means given rows), so the per-step descent inequalities hold exactly;
    the cross-iteration sequence settles but may drift slightly because the
    implied per-row regularizer weight follows the moving distances. With
    uniform_rows the rows are flat 1/k over the k nearest anchors (the
    unweighted-graph ablation) and the tracked objective is the plain
    assignment cost, which is monotone end to end.

    If history is a list, one dict per iteration is appended with keys
    anchors_in, indices, weights, objective.
    """
    x = as_matrix(x_mapped, "x_mapped")
    anchors = as_matrix(anchors0, "anchors0").copy()
    if anchors.shape[1] != x.shape[1]:
        raise ValueError(
            f"anchor dim {anchors.shape[1]} != sample dim {x.shape[1]}")
    m = anchors.shape[0]
    if not (1 <= cfg.k < m):
        raise ValueError(f"need 1 <= k < m={m}, got k={cfg.k}")

    dists = pairwise_sq_dist(x, anchors)
    prev_obj = None
    g = None
    for _ in range(cfg.max_iters):
        anchors_in = anchors.copy()
        support, weights, gamma = _solve_rows(dists, cfg.k, uniform=uniform_rows)
        g = from_rows(support, weights, anchors_in, m)

        # Dead anchors would make delta singular; re-seed and re-solve.
        attempts = 0
        while np.any(g.delta <= DEAD_ANCHOR_TOL):
            dead = np.flatnonzero(g.delta <= DEAD_ANCHOR_TOL)
            _reseed_dead_anchors(x, anchors, dists, dead)
            anchors_in = anchors.copy()
            support, weights, gamma = _solve_rows(dists, cfg.k, uniform=uniform_rows)
            g = from_rows(support, weights, anchors_in, m)
            attempts += 1
            if attempts > m:
                raise RuntimeError("could not re-seed anchors to positive degree")

        d_sup = np.take_along_axis(dists, support, axis=1)
        if uniform_rows:
            obj = float(np.sum(weights * d_sup))
        else:
            obj = _objective(d_sup, weights, gamma, m)
        if history is not None:
            history.append({
                "anchors_in": anchors_in,
                "indices": support.copy(),
                "weights": weights.copy(),
                "objective": obj,
            })

        anchors = update_anchors(x, g)
        dists = pairwise_sq_dist(x, anchors)

        if prev_obj is not None:
            denom = max(abs(prev_obj), 1e-30)
            if abs(prev_obj - obj) / denom < cfg.tol:
                break
        prev_obj = obj

    return AnchorGraph(indices=g.indices, weights=g.weights, delta=g.delta,
                       anchors=anchors, m=m)


def normalize_anchor_side(g: AnchorGraph) -> np.ndarray:
    """Anchor-to-sample transition matrix (m x n): column j of B divided by
    its degree, so each anchor row is a distribution over samples."""
    if np.any(g.delta <= DEAD_ANCHOR_TOL):
        raise ValueError("zero-degree anchor; graph is not normalizable")
    return (g.to_dense() / g.delta[None, :]).T


def dense_adjacency(g: AnchorGraph) -> tuple[np.ndarray, np.ndarray]:
    """Materialized adjacencies (sample side n x n, anchor side m x m).

    Both are row-stochastic by construction. Only tests and the benchmark
    reference path call this; production never forms either matrix.
    """
    if np.any(g.delta <= DEAD_ANCHOR_TOL):
        raise ValueError("zero-degree anchor; adjacency undefined")
    b = g.to_dense()
    b_scaled = b / g.delta[None, :]
    a = b_scaled @ b.T
    a_t = (b.T @ b) / g.delta[:, None]
    return a, a_t
