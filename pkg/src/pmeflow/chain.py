"""Finite reversible Markov chains and the discrete calculus built on them.

A chain is a rate matrix Q (nonnegative off-diagonal, zero row sums,
irreducible) together with its stationary probability vector pi, required to
satisfy detailed balance  Q(x,y) pi(x) = Q(y,x) pi(y).  On top of it live the
discrete gradient, divergence, Laplacian and the pi- and density-weighted
inner products that the transport metric, the entropy Hessian and the
diffusion solver all reduce to.

Conventions:
  * functions on states are 1-d arrays ("vertex functions"),
  * functions on pairs are n x n arrays ("edge functions"); entries on pairs
    with Q(x,y) = 0 are ignored by every inner product, so weights that blow
    up on the boundary never produce 0 * inf there,
  * densities are nonnegative vectors rho with sum_x rho(x) pi(x) = 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    InvalidDensity,
    NotAQMatrix,
    NotIrreducible,
    NotReversible,
    SingularSolve,
)

ROW_SUM_TOL = 1e-12
DETAILED_BALANCE_TOL = 1e-10
MASS_TOL = 1e-10


@dataclass(frozen=True)
class MarkovChain:
    """Irreducible reversible chain: rate matrix, stationary vector, edges.

    Instances are immutable values; build them with :func:`build_chain`.
    ``edge_u``/``edge_v`` list each undirected edge once (u < v) and
    ``edge_w = Q(u,v) pi(u)``, which equals ``Q(v,u) pi(v)`` by detailed
    balance and is the natural symmetric edge weight.
    """

    q: np.ndarray
    pi: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray
    edge_w: np.ndarray

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edge_u.shape[0]

    @cached_property
    def support(self) -> np.ndarray:
        """Boolean mask of ordered pairs (x != y) with Q(x,y) > 0."""
        mask = self.q > 0
        np.fill_diagonal(mask, False)
        return mask

    @cached_property
    def qpi(self) -> np.ndarray:
        """Q(x,y) pi(x), the weight of the ordered pair (x,y)."""
        return self.q * self.pi[:, None]

    @cached_property
    def incidence(self) -> np.ndarray:
        """n x E matrix D with (D V)(x) = sum_y V(x,y) Q(x,y) for
        antisymmetric V stored on canonical edges (flux from u to v)."""
        d = np.zeros((self.n, self.n_edges))
        cols = np.arange(self.n_edges)
        d[self.edge_u, cols] = self.q[self.edge_u, self.edge_v]
        d[self.edge_v, cols] = -self.q[self.edge_v, self.edge_u]
        return d

    @cached_property
    def _poisson_lu(self):
        """LU factors of the bordered Laplacian [[Q, 1], [pi^T, 0]]."""
        import scipy.linalg

        n = self.n
        m = np.zeros((n + 1, n + 1))
        m[:n, :n] = self.q
        m[:n, n] = 1.0
        m[n, :n] = self.pi
        return scipy.linalg.lu_factor(m)

    def poisson_solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve Delta u = rhs - <rhs>_pi with <u>_pi = 0."""
        import scipy.linalg

        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape != (self.n,):
            raise SingularSolve(f"rhs has shape {rhs.shape}, expected ({self.n},)")
        c = float(self.pi @ rhs)
        b = np.concatenate([rhs - c, [0.0]])
        try:
            sol = scipy.linalg.lu_solve(self._poisson_lu, b)
        except (ValueError, np.linalg.LinAlgError) as exc:  # pragma: no cover
            raise SingularSolve(str(exc)) from exc
        return sol[: self.n]


@dataclass(frozen=True)
class Density:
    """Probability density w.r.t. pi: nonnegative, sum rho(x) pi(x) = 1."""

    values: np.ndarray

    @property
    def is_interior(self) -> bool:
        return bool(self.values.min() > 0.0)


def density(chain: MarkovChain, values, *, normalize: bool = False) -> Density:
    """Validate (or renormalize) a vector into a Density on the chain."""
    v = np.asarray(values, dtype=float).copy()
    if v.shape != (chain.n,):
        raise InvalidDensity(f"density has shape {v.shape}, expected ({chain.n},)")
    if v.min() < 0.0:
        if v.min() < -MASS_TOL:
            raise InvalidDensity(f"negative entry {v.min():g}")
        v = np.maximum(v, 0.0)
    mass = float(v @ chain.pi)
    if normalize:
        if mass <= 0.0:
            raise InvalidDensity("cannot normalize: total mass is zero")
        v /= mass
    elif abs(mass - 1.0) > MASS_TOL:
        raise InvalidDensity(f"total pi-mass {mass!r} differs from 1")
    v.setflags(write=False)
    return Density(v)


def uniform_density(chain: MarkovChain) -> Density:
    return density(chain, np.ones(chain.n))


def as_values(rho) -> np.ndarray:
    """Accept a Density or a plain array and return the value vector."""
    return rho.values if isinstance(rho, Density) else np.asarray(rho, dtype=float)


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def _check_strongly_connected(mask: np.ndarray) -> bool:
    n = mask.shape[0]

    def reach(adj):
        seen = np.zeros(n, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            x = stack.pop()
            for y in np.nonzero(adj[x])[0]:
                if not seen[y]:
                    seen[y] = True
                    stack.append(int(y))
        return seen

    return bool(reach(mask).all() and reach(mask.T).all())


def stationary_distribution(q: np.ndarray) -> np.ndarray:
    """Unique probability solution of pi Q = 0, via the null space of Q^T."""
    _, _, vt = np.linalg.svd(q.T)
    pi = vt[-1]
    total = pi.sum()
    if total == 0.0:
        raise NotIrreducible("null space of Q^T has no one-signed element")
    pi = pi / total
    if pi.min() <= 0.0:
        raise NotIrreducible(f"stationary vector has nonpositive entry {pi.min():g}")
    return pi


def build_chain(q, pi=None) -> MarkovChain:
    """Validate a rate matrix and assemble the chain.

    pi is always computed from Q; a user-supplied pi is only cross-checked.
    Raises NotAQMatrix / NotIrreducible / NotReversible.
    """
    q = np.asarray(q, dtype=float).copy()
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise NotAQMatrix(f"rate matrix must be square, got shape {q.shape}")
    n = q.shape[0]
    if n < 2:
        raise NotAQMatrix("need at least two states")
    off = q.copy()
    np.fill_diagonal(off, 0.0)
    if off.min() < 0.0:
        raise NotAQMatrix(f"negative off-diagonal rate {off.min():g}")
    scale = max(1.0, float(np.abs(q).max()))
    row_sums = q.sum(axis=1)
    if np.abs(row_sums).max() > ROW_SUM_TOL * scale:
        raise NotAQMatrix(f"row sums not zero (max |sum| = {np.abs(row_sums).max():g})")

    mask = off > 0
    if not _check_strongly_connected(mask):
        raise NotIrreducible("support graph of Q is not strongly connected")

    pi_computed = stationary_distribution(q)
    if pi is not None:
        pi_user = np.asarray(pi, dtype=float)
        if pi_user.shape != (n,) or np.abs(pi_user - pi_computed).max() > 1e-8:
            raise NotReversible("supplied pi does not match the stationary vector of Q")
    pi = pi_computed

    balance = q * pi[:, None] - q.T * pi[None, :]
    if np.abs(balance).max() > DETAILED_BALANCE_TOL * scale:
        raise NotReversible(
            f"detailed-balance residual {np.abs(balance).max():g} exceeds tolerance"
        )

    iu, iv = np.nonzero(np.triu(mask | mask.T, k=1))
    edge_u = iu.astype(np.int32)
    edge_v = iv.astype(np.int32)
    edge_w = q[edge_u, edge_v] * pi[edge_u]
    for a in (q, pi, edge_u, edge_v, edge_w):
        a.setflags(write=False)
    return MarkovChain(q=q, pi=pi, edge_u=edge_u, edge_v=edge_v, edge_w=edge_w)


def two_point_chain(p: float, q: float) -> MarkovChain:
    """States {a, b} with rates Q(a,b) = p, Q(b,a) = q."""
    if p <= 0 or q <= 0:
        raise NotAQMatrix("two-point rates must be positive")
    return build_chain([[-p, p], [q, -q]])


def cycle_chain(n: int, rate: float = 1.0) -> MarkovChain:
    """Simple random walk on the discrete circle Z/nZ with the given rate."""
    if n < 2:
        raise NotAQMatrix("cycle needs at least two states")
    q = np.zeros((n, n))
    for i in range(n):
        q[i, (i + 1) % n] += rate
        q[i, (i - 1) % n] += rate
    np.fill_diagonal(q, 0.0)
    np.fill_diagonal(q, -q.sum(axis=1))
    return build_chain(q)


def random_reversible_chain(n: int, rng, *, density_of_edges: float = 1.0) -> MarkovChain:
    """Random reversible chain via symmetrization Q(x,y) = w(x,y)/pi(x)."""
    w = rng.uniform(0.2, 1.0, size=(n, n))
    w = 0.5 * (w + w.T)
    if density_of_edges < 1.0:
        keep = rng.uniform(size=(n, n)) < density_of_edges
        keep = keep | keep.T
        for i in range(n - 1):
            keep[i, i + 1] = keep[i + 1, i] = True
        w = w * keep
    pi = rng.dirichlet(np.full(n, 5.0))
    q = w / pi[:, None]
    np.fill_diagonal(q, 0.0)
    np.fill_diagonal(q, -q.sum(axis=1))
    return build_chain(q)


def chain_from_text(text: str) -> MarkovChain:
    """Parse the line-oriented chain format: fields n, Q, optional pi.

    Example::

        n = 2
        Q = [[-1, 1], [2, -2]]
        pi = [0.6666666666666666, 0.3333333333333333]
    """
    fields = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise NotAQMatrix(f"line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in ("n", "Q", "pi"):
            raise NotAQMatrix(f"line {lineno}: unknown field {key!r}")
        if key in fields:
            raise NotAQMatrix(f"line {lineno}: duplicate field {key!r}")
        try:
            fields[key] = json.loads(value.strip())
        except json.JSONDecodeError as exc:
            raise NotAQMatrix(f"line {lineno}: unparseable value ({exc})") from exc
    if "Q" not in fields:
        raise NotAQMatrix("missing field Q")
    q = np.asarray(fields["Q"], dtype=float)
    if "n" in fields and q.shape != (fields["n"], fields["n"]):
        raise NotAQMatrix(f"Q has shape {q.shape}, declared n = {fields['n']}")
    return build_chain(q, pi=fields.get("pi"))


# ---------------------------------------------------------------------------
# discrete calculus
# ---------------------------------------------------------------------------

def laplacian(chain: MarkovChain, psi: np.ndarray) -> np.ndarray:
    """(Delta psi)(x) = sum_y Q(x,y) (psi(y) - psi(x)) = (Q psi)(x)."""
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (chain.n,):
        raise ValueError(f"psi has shape {psi.shape}, expected ({chain.n},)")
    return chain.q @ psi


def gradient(psi: np.ndarray) -> np.ndarray:
    """Edge function (grad psi)(x,y) = psi(y) - psi(x)."""
    psi = np.asarray(psi, dtype=float)
    return psi[None, :] - psi[:, None]


def divergence(chain: MarkovChain, big_psi: np.ndarray) -> np.ndarray:
    """(div Psi)(x) = 1/2 sum_y (Psi(x,y) - Psi(y,x)) Q(x,y)."""
    big_psi = np.asarray(big_psi, dtype=float)
    if big_psi.shape != (chain.n, chain.n):
        raise ValueError(f"Psi has shape {big_psi.shape}, expected square")
    anti = big_psi - big_psi.T
    return 0.5 * np.where(chain.support, anti * chain.q, 0.0).sum(axis=1)


def ip_vertex(chain: MarkovChain, phi: np.ndarray, psi: np.ndarray) -> float:
    return float(np.asarray(phi) @ (chain.pi * np.asarray(psi)))


def ip_edge(chain: MarkovChain, big_phi: np.ndarray, big_psi: np.ndarray) -> float:
    """<Phi, Psi>_pi = 1/2 sum_{x,y} Phi Psi Q(x,y) pi(x), over Q > 0 pairs."""
    prod = np.where(chain.support, np.asarray(big_phi) * np.asarray(big_psi), 0.0)
    return 0.5 * float((prod * chain.qpi).sum())


def inner_rho(chain: MarkovChain, theta, rho, big_phi, big_psi) -> float:
    """Density-weighted inner product with weights theta(rho(x), rho(y))."""
    v = as_values(rho)
    rx, ry = np.meshgrid(v, v, indexing="ij")
    hat = np.where(chain.support, theta.value(rx, ry), 0.0)
    prod = np.where(chain.support, np.asarray(big_phi) * np.asarray(big_psi), 0.0)
    return 0.5 * float((prod * hat * chain.qpi).sum())


def rho_hat(chain: MarkovChain, theta, rho) -> np.ndarray:
    """Edge weight matrix theta(rho(x), rho(y)) on the support, 0 elsewhere."""
    v = as_values(rho)
    rx, ry = np.meshgrid(v, v, indexing="ij")
    return np.where(chain.support, theta.value(rx, ry), 0.0)
