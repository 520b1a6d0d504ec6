"""Kernel support vector machines trained by sequential minimal optimization.

Binary machines solve the standard soft-margin dual

    max_a  sum(a) - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
    s.t.   0 <= a_i <= C,  sum_i a_i y_i = 0

two multipliers at a time. The working pair is the maximal violating pair
with a second-order choice of the partner, and optimization stops once the
KKT gap falls below the tolerance. Multi-class models combine one machine per
class pair by voting.
"""
from __future__ import annotations

import json
import math
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .corpus import SentimentLabel
from .vectorize import SparseVector, stack

FORMAT_VERSION = 1
# full Gram matrices are cached up to this many training points
GRAM_CACHE_LIMIT = 10_000
_TAU = 1e-12


class SvmError(ValueError):
    pass


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"
    gamma: float | None = 0.1

    def __post_init__(self):
        if self.kind not in ("rbf", "linear"):
            raise SvmError(f"unknown kernel {self.kind!r}")
        if self.kind == "rbf":
            if self.gamma is None or not self.gamma > 0:
                raise SvmError("rbf kernel needs a positive gamma")
        elif self.gamma is not None:
            object.__setattr__(self, "gamma", None)


@dataclass(frozen=True)
class SvmHyperParams:
    C: float = 4.0
    kernel: KernelSpec = field(default_factory=KernelSpec)
    kkt_tolerance: float = 1e-3
    max_iterations: int = 1_000_000

    def __post_init__(self):
        if not self.C > 0:
            raise SvmError("C must be positive")
        if not self.kkt_tolerance > 0:
            raise SvmError("kkt_tolerance must be positive")
        if self.max_iterations < 1:
            raise SvmError("max_iterations must be >= 1")


def kernel_eval(k: KernelSpec, x: SparseVector, y: SparseVector) -> float:
    if x.dimension != y.dimension:
        raise SvmError(f"dimension mismatch: {x.dimension} vs {y.dimension}")
    if k.kind == "linear":
        return x.dot(y)
    diff = dict(zip(x.indices, x.values))
    for i, v in zip(y.indices, y.values):
        diff[i] = diff.get(i, 0.0) - v
    sq = math.fsum(d * d for d in diff.values())
    return math.exp(-k.gamma * sq)


def kernel_matrix(k: KernelSpec, a: sp.csr_matrix, b: sp.csr_matrix) -> np.ndarray:
    """Dense ``K[i, j] = k(a_i, b_j)`` for two CSR row batches."""
    if a.shape[1] != b.shape[1]:
        raise SvmError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    dots = np.asarray((a @ b.T).todense(), dtype=float)
    if k.kind == "linear":
        return dots
    sq_a = np.asarray(a.multiply(a).sum(axis=1), dtype=float).reshape(-1, 1)
    sq_b = np.asarray(b.multiply(b).sum(axis=1), dtype=float).reshape(1, -1)
    dist = np.maximum(sq_a + sq_b - 2.0 * dots, 0.0)
    return np.exp(-k.gamma * dist)


class _Columns:
    """Kernel columns of the training set, either from a full Gram matrix or recomputed."""

    def __init__(self, k: KernelSpec, x: sp.csr_matrix, cache_rows: int = 256):
        self.n = x.shape[0]
        self.full = None
        if self.n <= GRAM_CACHE_LIMIT:
            self.full = kernel_matrix(k, x, x)
            self.diag = np.diag(self.full).copy()
        else:
            self.k, self.x = k, x
            self.cache: OrderedDict[int, np.ndarray] = OrderedDict()
            self.cache_rows = cache_rows
            if k.kind == "rbf":
                self.diag = np.ones(self.n)
            else:
                self.diag = np.asarray(x.multiply(x).sum(axis=1), dtype=float).ravel()

    def __getitem__(self, i: int) -> np.ndarray:
        if self.full is not None:
            return self.full[i]
        col = self.cache.get(i)
        if col is None:
            col = kernel_matrix(self.k, self.x, self.x[i]).ravel()
            self.cache[i] = col
            if len(self.cache) > self.cache_rows:
                self.cache.popitem(last=False)
        else:
            self.cache.move_to_end(i)
        return col


@dataclass(frozen=True)
class SolveResult:
    alpha: np.ndarray
    bias: float
    iterations: int
    converged: bool
    gap: float


def _solve_dual(cols: _Columns, y: np.ndarray, C: float, tol: float, max_iter: int) -> SolveResult:
    n = y.size
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 1/2 a'Qa - e'a
    gap = math.inf
    it = 0
    converged = False
    while it < max_iter:
        pos, neg = y > 0, y < 0
        up = (pos & (alpha < C)) | (neg & (alpha > 0))
        low = (pos & (alpha > 0)) | (neg & (alpha < C))
        v = -y * grad
        v_up = np.where(up, v, -np.inf)
        i = int(np.argmax(v_up))
        m = v_up[i]
        v_low = np.where(low, v, np.inf)
        big_m = v_low.min()
        gap = m - big_m
        if gap < tol:
            converged = True
            break
        ki = cols[i]
        b = m - v
        a = cols.diag[i] + cols.diag - 2.0 * ki
        a = np.where(a > 0, a, _TAU)
        cand = low & (b > 0)
        score = np.where(cand, -(b * b) / a, np.inf)
        j = int(np.argmin(score))
        kj = cols[j]

        step = b[j] / a[j]
        room_i = C - alpha[i] if y[i] > 0 else alpha[i]
        room_j = alpha[j] if y[j] > 0 else C - alpha[j]
        step = min(step, room_i, room_j)
        old_i, old_j = alpha[i], alpha[j]
        alpha[i] = min(max(old_i + y[i] * step, 0.0), C)
        alpha[j] = min(max(old_j - y[j] * step, 0.0), C)
        # snap multipliers that reached a bound so the sets above stay exact
        for t in (i, j):
            if alpha[t] < 1e-14 * C:
                alpha[t] = 0.0
            elif alpha[t] > C * (1 - 1e-14):
                alpha[t] = C
        d_i, d_j = alpha[i] - old_i, alpha[j] - old_j
        grad += y * (y[i] * d_i * ki + y[j] * d_j * kj)
        it += 1

    v = -y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        bias = float(v[free].mean())
    else:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        hi = v[up].max() if up.any() else v[low].min()
        lo = v[low].min() if low.any() else hi
        bias = float((hi + lo) / 2.0)
    return SolveResult(alpha, bias, it, converged, float(gap))


@dataclass(frozen=True)
class BinarySvm:
    support_vectors: tuple[SparseVector, ...]
    dual_coefficients: tuple[float, ...]
    bias: float
    kernel: KernelSpec
    class_pair: tuple[SentimentLabel, SentimentLabel] | tuple[int, int] = (1, -1)
    C: float = 1.0
    iterations: int = 0
    converged: bool = True
    dimension: int = 0
    _sv: sp.csr_matrix | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self._sv is None and self.support_vectors:
            object.__setattr__(self, "_sv", stack(self.support_vectors, self.dimension))

    def decision_function(self, x) -> np.ndarray:
        """Signed distances for a CSR batch (or a single SparseVector)."""
        if isinstance(x, SparseVector):
            x = stack([x])
        if x.shape[1] != self.dimension:
            raise SvmError(f"dimension mismatch: model has {self.dimension}, input has {x.shape[1]}")
        if not self.support_vectors:
            return np.full(x.shape[0], self.bias)
        k = kernel_matrix(self.kernel, x, self._sv)
        return k @ np.asarray(self.dual_coefficients) + self.bias

    def predict_sign(self, x) -> np.ndarray:
        return np.where(self.decision_function(x) > 0, 1, -1)


def dual_objective(alpha, y, gram) -> float:
    ay = np.asarray(alpha) * np.asarray(y)
    return float(np.sum(alpha) - 0.5 * ay @ np.asarray(gram) @ ay)


def kkt_violations(alpha, y, gram, bias: float, C: float) -> np.ndarray:
    """Per-point violation of the soft-margin KKT conditions."""
    alpha, y = np.asarray(alpha, dtype=float), np.asarray(y, dtype=float)
    g = y * (np.asarray(gram) @ (alpha * y) + bias) - 1.0
    at_zero, at_c = alpha <= 0.0, alpha >= C
    free = ~(at_zero | at_c)
    viol = np.zeros_like(g)
    viol[at_zero] = np.maximum(0.0, -g[at_zero])
    viol[at_c] = np.maximum(0.0, g[at_c])
    viol[free] = np.abs(g[free])
    return viol


@dataclass(frozen=True)
class BinaryTrainResult:
    machine: BinarySvm
    alpha: np.ndarray
    y: np.ndarray
    gram: np.ndarray | None
    max_violation: float

    @property
    def dual_objective(self) -> float:
        if self.gram is None:
            raise SvmError("Gram matrix not kept for this problem size")
        return dual_objective(self.alpha, self.y, self.gram)


def train_binary_smo(xs: Sequence[SparseVector] | sp.csr_matrix, ys, hp: SvmHyperParams,
                     seed: int = 0, class_pair=(1, -1)) -> BinaryTrainResult:
    """Train one binary machine on +/-1 labels.

    ``seed`` fixes the order in which training points are presented to the
    solver, which only matters for breaking exact ties in the working-set
    choice. Hitting ``max_iterations`` emits a :class:`ConvergenceWarning`
    and still returns the model.
    """
    x = xs if sp.issparse(xs) else stack(list(xs))
    x = sp.csr_matrix(x)
    y = np.asarray(ys, dtype=float)
    if x.shape[0] != y.size:
        raise SvmError("xs and ys differ in length")
    if y.size < 2:
        raise SvmError("need at least two training points")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise SvmError("labels must be +1 or -1")
    if np.all(y == y[0]):
        raise SvmError("single-class input: both +1 and -1 labels are required")

    perm = np.random.default_rng(seed).permutation(y.size)
    xp, yp = x[perm], y[perm]
    cols = _Columns(hp.kernel, xp)
    res = _solve_dual(cols, yp, hp.C, hp.kkt_tolerance, hp.max_iterations)
    if not res.converged:
        warnings.warn(f"SMO stopped at the iteration cap ({hp.max_iterations}) with KKT gap {res.gap:.3g}",
                      ConvergenceWarning, stacklevel=2)

    alpha = np.empty_like(res.alpha)
    alpha[perm] = res.alpha
    gram = None
    if cols.full is not None:
        gram = np.empty_like(cols.full)
        gram[np.ix_(perm, perm)] = cols.full
    sv_idx = np.flatnonzero(alpha > 0)
    sv_rows = x[sv_idx]
    svs = tuple(_row_vector(sv_rows, r) for r in range(sv_rows.shape[0]))
    machine = BinarySvm(
        support_vectors=svs,
        dual_coefficients=tuple(float(alpha[i] * y[i]) for i in sv_idx),
        bias=res.bias,
        kernel=hp.kernel,
        class_pair=class_pair,
        C=hp.C,
        iterations=res.iterations,
        converged=res.converged,
        dimension=x.shape[1],
    )
    max_viol = float(kkt_violations(alpha, y, gram, res.bias, hp.C).max()) if gram is not None else res.gap
    return BinaryTrainResult(machine, alpha, y, gram, max_viol)


def _row_vector(m: sp.csr_matrix, r: int) -> SparseVector:
    lo, hi = m.indptr[r], m.indptr[r + 1]
    order = np.argsort(m.indices[lo:hi], kind="stable")
    idx = m.indices[lo:hi][order]
    val = m.data[lo:hi][order]
    keep = val != 0.0
    return SparseVector(tuple(int(i) for i in idx[keep]), tuple(float(v) for v in val[keep]), m.shape[1])


@dataclass(frozen=True)
class SvmModel:
    machines: tuple[BinarySvm, ...]
    classes: tuple[SentimentLabel, ...]
    kernel: KernelSpec
    C: float
    dimension: int

    def __post_init__(self):
        k = len(self.classes)
        if len(self.machines) != k * (k - 1) // 2:
            raise SvmError(f"expected {k * (k - 1) // 2} machines for {k} classes")

    def votes(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Vote counts and summed |decision| per class, shape ``(n, n_classes)``."""
        if isinstance(x, SparseVector):
            x = stack([x])
        if x.shape[1] != self.dimension:
            raise SvmError(f"dimension mismatch: model has {self.dimension}, input has {x.shape[1]}")
        pos = {c: i for i, c in enumerate(self.classes)}
        votes = np.zeros((x.shape[0], len(self.classes)), dtype=int)
        strength = np.zeros((x.shape[0], len(self.classes)))
        rows = np.arange(x.shape[0])
        for mach in self.machines:
            dec = mach.decision_function(x)
            a, b = pos[mach.class_pair[0]], pos[mach.class_pair[1]]
            winner = np.where(dec > 0, a, b)
            votes[rows, winner] += 1
            strength[rows, winner] += np.abs(dec)
        return votes, strength

    def predict_many(self, x) -> list[SentimentLabel]:
        if not sp.issparse(x) and not isinstance(x, SparseVector):
            x = stack(list(x), self.dimension)
        votes, strength = self.votes(x)
        out = []
        for v, s in zip(votes, strength):
            best = max(range(len(self.classes)),
                       key=lambda c: (v[c], s[c], -int(self.classes[c])))
            out.append(self.classes[best])
        return out

    def predict(self, x: SparseVector) -> SentimentLabel:
        return self.predict_many(stack([x]))[0]

    # -- persistence -------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "kernel": self.kernel.kind,
            "gamma": self.kernel.gamma,
            "C": self.C,
            "dimension": self.dimension,
            "classes": [c.name.lower() for c in self.classes],
            "machines": [
                {
                    "pair": [SentimentLabel(p).name.lower() for p in m.class_pair],
                    "support_vectors": [v.to_json() for v in m.support_vectors],
                    "dual_coefficients": list(m.dual_coefficients),
                    "bias": m.bias,
                    "iterations": m.iterations,
                    "converged": m.converged,
                }
                for m in self.machines
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SvmModel":
        if not isinstance(obj, dict) or obj.get("version") != FORMAT_VERSION:
            found = obj.get("version") if isinstance(obj, dict) else None
            raise SvmError(f"unsupported model version {found!r} (expected {FORMAT_VERSION})")
        try:
            kernel = KernelSpec(obj["kernel"], obj["gamma"])
            dim = int(obj["dimension"])
            machines = []
            for m in obj["machines"]:
                pair = tuple(SentimentLabel[p.upper()] for p in m["pair"])
                svs = tuple(SparseVector(tuple(v["indices"]), tuple(v["values"]), dim)
                            for v in m["support_vectors"])
                machines.append(BinarySvm(svs, tuple(m["dual_coefficients"]), float(m["bias"]), kernel,
                                          pair, float(obj["C"]), int(m.get("iterations", 0)),
                                          bool(m.get("converged", True)), dim))
            classes = tuple(SentimentLabel[c.upper()] for c in obj["classes"])
            return cls(tuple(machines), classes, kernel, float(obj["C"]), dim)
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise SvmError(f"corrupt model document: {exc}") from None

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_json()) + "\n", encoding="utf-8")
        return path


def save_model(model: SvmModel, path) -> Path:
    return model.save(path)


def load_model(path) -> SvmModel:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SvmError(f"corrupt model file {path}: {exc.msg}") from None
    return SvmModel.from_json(obj)


def train_multiclass(xs, labels: Sequence[SentimentLabel], hp: SvmHyperParams, seed: int = 0) -> SvmModel:
    """One-vs-one: a binary machine per class pair, trained on that pair's records only."""
    x = xs if sp.issparse(xs) else stack(list(xs))
    x = sp.csr_matrix(x)
    labels = [SentimentLabel(l) for l in labels]
    if len(labels) != x.shape[0]:
        raise SvmError("xs and labels differ in length")
    classes = tuple(sorted(set(labels)))
    if len(classes) < 2:
        raise SvmError("need at least two classes")
    lab = np.array([int(l) for l in labels])
    machines = []
    for n, (a, b) in enumerate(combinations(classes, 2)):
        idx = np.flatnonzero((lab == a) | (lab == b))
        y = np.where(lab[idx] == a, 1.0, -1.0)
        res = train_binary_smo(x[idx], y, hp, seed=seed + n, class_pair=(a, b))
        machines.append(res.machine)
    return SvmModel(tuple(machines), classes, hp.kernel, hp.C, x.shape[1])
