"""Ball embeddings of an ontology trained by projected gradient descent.

Concepts are balls (center, radius) and individuals are points in R^n.
Per-axiom hinge losses with margin ``gamma``:

    Sub(C, D):       max(0, |c_C - c_D| + r_C - r_D + gamma)
    Disjoint(C, D):  max(0, r_C + r_D - |c_C - c_D| + gamma)
    MemberOf(a, C):  max(0, |p_a - c_C| - r_C + gamma)

Rel, Domain and Range act through the memberships they derive in the closure.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .ontology import Axiom, Disjoint, MemberOf, Ontology, OntologyError, Sub, axiom_to_json, closure, is_consistent

__all__ = ["BallEmbedding", "TrainConfig", "VerifyReport", "axiom_loss", "total_loss", "gradients",
           "train", "verify", "MIN_RADIUS"]

MIN_RADIUS = 1e-4
VERIFY_SLACK = 1e-9


@dataclass
class BallEmbedding:
    """Parameters live in one flat vector: per concept ``center (dim) + radius``,
    then per individual ``point (dim)``, both in sorted name order."""

    dim: int
    concepts: list[str]
    individuals: list[str]
    theta: np.ndarray
    _cidx: dict[str, int] = field(init=False, repr=False)
    _iidx: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        self.theta = np.asarray(self.theta, dtype=float)
        if self.theta.shape != (self.size(self.dim, len(self.concepts), len(self.individuals)),):
            raise ValueError("parameter vector has the wrong length")
        self._cidx = {c: i for i, c in enumerate(self.concepts)}
        self._iidx = {a: i for i, a in enumerate(self.individuals)}

    @staticmethod
    def size(dim: int, n_concepts: int, n_individuals: int) -> int:
        return n_concepts * (dim + 1) + n_individuals * dim

    # offsets into theta
    def center_slice(self, c: str) -> slice:
        i = self._concept(c) * (self.dim + 1)
        return slice(i, i + self.dim)

    def radius_index(self, c: str) -> int:
        return self._concept(c) * (self.dim + 1) + self.dim

    def point_slice(self, a: str) -> slice:
        if a not in self._iidx:
            raise KeyError(f"individual {a!r} is not embedded")
        i = len(self.concepts) * (self.dim + 1) + self._iidx[a] * self.dim
        return slice(i, i + self.dim)

    def _concept(self, c: str) -> int:
        if c not in self._cidx:
            raise KeyError(f"concept {c!r} is not embedded")
        return self._cidx[c]

    def center(self, c: str) -> np.ndarray:
        return self.theta[self.center_slice(c)]

    def radius(self, c: str) -> float:
        return float(self.theta[self.radius_index(c)])

    def point(self, a: str) -> np.ndarray:
        return self.theta[self.point_slice(a)]

    def with_theta(self, theta: np.ndarray) -> "BallEmbedding":
        return BallEmbedding(self.dim, self.concepts, self.individuals, theta)

    @classmethod
    def from_parts(cls, dim: int, centers: Mapping[str, Sequence[float]], radii: Mapping[str, float],
                   points: Mapping[str, Sequence[float]] | None = None) -> "BallEmbedding":
        points = points or {}
        concepts = sorted(centers)
        individuals = sorted(points)
        theta = []
        for c in concepts:
            theta.extend(centers[c])
            theta.append(radii[c])
        for a in individuals:
            theta.extend(points[a])
        return cls(dim, concepts, individuals, np.array(theta, dtype=float))

    @classmethod
    def initial(cls, o: Ontology, dim: int, seed: int) -> "BallEmbedding":
        concepts = sorted(o.concepts)
        individuals = sorted(o.individuals)
        rng = np.random.default_rng(seed)
        theta = rng.uniform(-1.0, 1.0, cls.size(dim, len(concepts), len(individuals)))
        emb = cls(dim, concepts, individuals, theta)
        for c in concepts:
            emb.theta[emb.radius_index(c)] = 0.5
        return emb

    def to_json(self) -> dict:
        out: dict[str, dict] = {}
        for c in self.concepts:
            out[c] = {"center": [float(x) for x in self.center(c)], "radius": self.radius(c)}
        for a in self.individuals:
            out[a] = {"point": [float(x) for x in self.point(a)]}
        return out

    @classmethod
    def from_json(cls, data: Mapping[str, Mapping]) -> "BallEmbedding":
        centers, radii, points = {}, {}, {}
        dim = None
        for name, d in data.items():
            if "center" in d:
                centers[name] = d["center"]
                radii[name] = d["radius"]
                dim = len(d["center"])
            else:
                points[name] = d["point"]
                dim = len(d["point"])
        if dim is None:
            raise ValueError("empty embedding")
        return cls.from_parts(dim, centers, radii, points)


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 2
    margin: float = 0.05
    lr: float = 0.05
    epochs: int = 2000
    seed: int = 0
    r_max: float = 10.0
    max_halvings: int = 20

    def __post_init__(self) -> None:
        if self.margin < 0:
            raise ValueError("margin must be >= 0")
        if self.lr <= 0:
            raise ValueError("lr must be > 0")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.r_max <= MIN_RADIUS:
            raise ValueError("r_max must exceed the radius floor")


def _geometric_axioms(axioms: Iterable[Axiom]) -> list[Axiom]:
    return sorted((ax for ax in axioms if isinstance(ax, (Sub, Disjoint, MemberOf))),
                  key=lambda ax: (type(ax).__name__, ax.names()))


def _norm(v: np.ndarray) -> float:
    return float(np.sqrt(np.dot(v, v)))


def axiom_loss(e: BallEmbedding, axiom: Axiom, gamma: float) -> float:
    if isinstance(axiom, Sub):
        d = _norm(e.center(axiom.sub) - e.center(axiom.sup))
        return max(0.0, d + e.radius(axiom.sub) - e.radius(axiom.sup) + gamma)
    if isinstance(axiom, Disjoint):
        d = _norm(e.center(axiom.a) - e.center(axiom.b))
        return max(0.0, e.radius(axiom.a) + e.radius(axiom.b) - d + gamma)
    if isinstance(axiom, MemberOf):
        d = _norm(e.point(axiom.ind) - e.center(axiom.concept))
        return max(0.0, d - e.radius(axiom.concept) + gamma)
    return 0.0


class _Compiled:
    """Index arrays for vectorized loss and gradient over a fixed axiom list."""

    def __init__(self, e: BallEmbedding, axioms: Sequence[Axiom], r_max: float):
        n = e.dim
        self.n = n
        self.r_max = r_max
        sub = [ax for ax in axioms if isinstance(ax, Sub)]
        dis = [ax for ax in axioms if isinstance(ax, Disjoint)]
        mem = [ax for ax in axioms if isinstance(ax, MemberOf)]
        self.sub_a = np.array([e.center_slice(ax.sub).start for ax in sub], dtype=int)
        self.sub_b = np.array([e.center_slice(ax.sup).start for ax in sub], dtype=int)
        self.dis_a = np.array([e.center_slice(ax.a).start for ax in dis], dtype=int)
        self.dis_b = np.array([e.center_slice(ax.b).start for ax in dis], dtype=int)
        self.mem_p = np.array([e.point_slice(ax.ind).start for ax in mem], dtype=int)
        self.mem_c = np.array([e.center_slice(ax.concept).start for ax in mem], dtype=int)
        self.radius_idx = np.array([e.radius_index(c) for c in e.concepts], dtype=int)
        self.offsets = np.arange(n)

    def _vec(self, theta: np.ndarray, starts: np.ndarray) -> np.ndarray:
        return theta[starts[:, None] + self.offsets[None, :]]

    def _pair(self, theta: np.ndarray, a: np.ndarray, b: np.ndarray):
        diff = self._vec(theta, a) - self._vec(theta, b)
        dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        return diff, dist

    def loss_and_grad(self, theta: np.ndarray, gamma: float, need_grad: bool = True):
        n = self.n
        grad = np.zeros_like(theta) if need_grad else None
        total = 0.0

        def unit(diff, dist):
            safe = np.where(dist > 0, dist, 1.0)
            return np.where(dist[:, None] > 0, diff / safe[:, None], 0.0)

        def scatter(starts, vecs):
            np.add.at(grad, starts[:, None] + self.offsets[None, :], vecs)

        if self.sub_a.size:
            diff, dist = self._pair(theta, self.sub_a, self.sub_b)
            h = dist + theta[self.sub_a + n] - theta[self.sub_b + n] + gamma
            act = h > 0
            total += float(h[act].sum())
            if need_grad and act.any():
                u = unit(diff, dist)[act]
                scatter(self.sub_a[act], u)
                scatter(self.sub_b[act], -u)
                np.add.at(grad, self.sub_a[act] + n, 1.0)
                np.add.at(grad, self.sub_b[act] + n, -1.0)
        if self.dis_a.size:
            diff, dist = self._pair(theta, self.dis_a, self.dis_b)
            h = theta[self.dis_a + n] + theta[self.dis_b + n] - dist + gamma
            act = h > 0
            total += float(h[act].sum())
            if need_grad and act.any():
                u = unit(diff, dist)[act]
                scatter(self.dis_a[act], -u)
                scatter(self.dis_b[act], u)
                np.add.at(grad, self.dis_a[act] + n, 1.0)
                np.add.at(grad, self.dis_b[act] + n, 1.0)
        if self.mem_p.size:
            diff, dist = self._pair(theta, self.mem_p, self.mem_c)
            h = dist - theta[self.mem_c + n] + gamma
            act = h > 0
            total += float(h[act].sum())
            if need_grad and act.any():
                u = unit(diff, dist)[act]
                scatter(self.mem_p[act], u)
                scatter(self.mem_c[act], -u)
                np.add.at(grad, self.mem_c[act] + n, -1.0)
        if self.radius_idx.size:
            over = theta[self.radius_idx] - self.r_max
            act = over > 0
            total += float(over[act].sum())
            if need_grad and act.any():
                np.add.at(grad, self.radius_idx[act], 1.0)
        return total, grad


def _compile(e: BallEmbedding, o: Ontology, r_max: float) -> _Compiled:
    return _Compiled(e, _geometric_axioms(closure(o).axioms), r_max)


def total_loss(e: BallEmbedding, o: Ontology, gamma: float, r_max: float = 10.0) -> float:
    """Sum of hinge losses over the closure plus ``sum(max(0, r - r_max))``."""
    return _compile(e, o, r_max).loss_and_grad(e.theta, gamma, need_grad=False)[0]


def gradients(e: BallEmbedding, o: Ontology, gamma: float, r_max: float = 10.0) -> np.ndarray:
    """Analytic subgradient of :func:`total_loss`, aligned with ``e.theta``.

    Inactive hinges (including ties at zero) contribute nothing; a zero
    distance contributes no direction.
    """
    return _compile(e, o, r_max).loss_and_grad(e.theta, gamma)[1]


def _project(e: BallEmbedding, theta: np.ndarray, r_max: float) -> np.ndarray:
    idx = np.array([e.radius_index(c) for c in e.concepts], dtype=int)
    if idx.size:
        theta[idx] = np.clip(theta[idx], MIN_RADIUS, r_max)
    return theta


def train(o: Ontology, cfg: TrainConfig = TrainConfig()) -> tuple[BallEmbedding, list[float]]:
    """Full-batch descent with step halving; the returned loss trace never increases."""
    ok, violations = is_consistent(o)
    if not ok:
        raise OntologyError(f"cannot embed an inconsistent ontology ({len(violations)} conflicts)")
    e = BallEmbedding.initial(o, cfg.dim, cfg.seed)
    comp = _compile(e, o, cfg.r_max)
    theta = _project(e, e.theta.copy(), cfg.r_max)
    loss, grad = comp.loss_and_grad(theta, cfg.margin)
    trace = [loss]
    for _ in range(cfg.epochs):
        if loss == 0.0:
            break
        step = cfg.lr
        for _ in range(cfg.max_halvings + 1):
            cand = _project(e, theta - step * grad, cfg.r_max)
            cand_loss, cand_grad = comp.loss_and_grad(cand, cfg.margin)
            if cand_loss <= loss:
                break
            step /= 2
        else:
            break
        theta, loss, grad = cand, cand_loss, cand_grad
        trace.append(loss)
    return e.with_theta(theta), trace


@dataclass(frozen=True)
class VerifyReport:
    checked: int
    satisfied: int
    failing: list[Axiom]

    @property
    def fraction(self) -> float:
        return self.satisfied / self.checked if self.checked else 1.0

    def to_json(self) -> dict:
        return {"checked": self.checked, "satisfied": self.satisfied, "fraction": self.fraction,
                "failing": [axiom_to_json(ax) for ax in self.failing]}


def verify(e: BallEmbedding, o: Ontology) -> VerifyReport:
    """Check every closure axiom geometrically at zero margin."""
    axioms = _geometric_axioms(closure(o).axioms)
    failing = [ax for ax in axioms if axiom_loss(e, ax, 0.0) > VERIFY_SLACK]
    return VerifyReport(len(axioms), len(axioms) - len(failing), failing)


def dump_embedding(e: BallEmbedding, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(e.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
