"""Seeded benchmark suite: unimodal, multimodal, hybrid and composition
problems over the domain [-100, 100]^D.

Every problem is deterministic given (dimension, seed).  Base functions all
have their minimum value 0 at the origin; problems place the optimum by
shifting (within [-80, 80]^D), optionally rotating, and adding a bias, so
the global optimum value is known exactly for all non-composition problems.
Input scales keep the classic multimodal landscapes (rastrigin, griewank,
rosenbrock, schwefel) in their traditional working ranges after shifting.
"""

from __future__ import annotations

from typing import List, Optional

import numpy as np

from .core import Bounds, RandomSource

DOMAIN_HALF_WIDTH = 100.0
SHIFT_HALF_WIDTH = 80.0

# Per-dimension peak of w * sin(sqrt(w)) on [0, 500], rounded up a hair so the
# modified-schwefel base stays non-negative under floating-point evaluation.
_SCHWEFEL_PEAK = 418.9828872724339
_SCHWEFEL_OFFSET = 420.9687462275036


class DomainViolation(ValueError):
    """A point outside the problem domain was submitted for evaluation."""


# -- base functions (rows in, values out; minimum 0 at the origin) ----------

def sphere(z):
    return (z * z).sum(axis=1)


def elliptic(z):
    d = z.shape[1]
    coef = np.ones(1) if d == 1 else 10.0 ** (6.0 * np.arange(d) / (d - 1))
    return (coef * z * z).sum(axis=1)


def bent_cigar(z):
    return z[:, 0] ** 2 + 1e6 * (z[:, 1:] ** 2).sum(axis=1)


def discus(z):
    return 1e6 * z[:, 0] ** 2 + (z[:, 1:] ** 2).sum(axis=1)


def rosenbrock(z):
    y = z + 1.0
    return (100.0 * (y[:, :-1] ** 2 - y[:, 1:]) ** 2 + (y[:, :-1] - 1.0) ** 2).sum(axis=1)


def ackley(z):
    rms = np.sqrt((z * z).mean(axis=1))
    return (-20.0 * np.exp(-0.2 * rms)
            - np.exp(np.cos(2.0 * np.pi * z).mean(axis=1)) + 20.0 + np.e)


def rastrigin(z):
    return (z * z - 10.0 * np.cos(2.0 * np.pi * z) + 10.0).sum(axis=1)


def griewank(z):
    d = z.shape[1]
    return (1.0 + (z * z).sum(axis=1) / 4000.0
            - np.cos(z / np.sqrt(np.arange(1.0, d + 1.0))).prod(axis=1))


def mod_schwefel(z):
    d = z.shape[1]
    y = z + _SCHWEFEL_OFFSET
    ay = np.abs(y)
    g = np.where(ay <= 500.0, y * np.sin(np.sqrt(ay)), 0.0)
    w_over = 500.0 - np.mod(y, 500.0)
    g = np.where(y > 500.0,
                 w_over * np.sin(np.sqrt(np.abs(w_over))) - (y - 500.0) ** 2 / (10000.0 * d),
                 g)
    w_under = np.mod(ay, 500.0) - 500.0
    g = np.where(y < -500.0,
                 w_under * np.sin(np.sqrt(np.abs(w_under))) - (y + 500.0) ** 2 / (10000.0 * d),
                 g)
    return _SCHWEFEL_PEAK * d - g.sum(axis=1)


BASE_FUNCTIONS = {
    "sphere": sphere,
    "elliptic": elliptic,
    "bent_cigar": bent_cigar,
    "discus": discus,
    "rosenbrock": rosenbrock,
    "ackley": ackley,
    "rastrigin": rastrigin,
    "griewank": griewank,
    "mod_schwefel": mod_schwefel,
}

# Shifted inputs are rescaled into each base's traditional working range.
INPUT_SCALE = {
    "sphere": 1.0,
    "elliptic": 1.0,
    "bent_cigar": 1.0,
    "discus": 1.0,
    "rosenbrock": 2.048 / 100.0,
    "ackley": 1.0,
    "rastrigin": 5.12 / 100.0,
    "griewank": 6.0,
    "mod_schwefel": 10.0,
}


def random_rotation(dimension: int, rng: RandomSource) -> np.ndarray:
    """Orthogonal matrix from QR of a standard-normal matrix (sign-fixed)."""
    if dimension == 1:
        return np.array([[1.0 if rng.random() < 0.5 else -1.0]])
    a = rng.normal(0.0, 1.0, (dimension, dimension))
    q, r = np.linalg.qr(a)
    d = np.diag(r)
    return q * np.where(d == 0.0, 1.0, np.sign(d))


class BenchProblem:
    """Common surface of all suite problems (duck-types core.Problem)."""

    def __init__(self, id: str, dimension: int, category: str, bias: float,
                 shift: np.ndarray):
        self.id = id
        self.dimension = dimension
        self.category = category
        self.bias = float(bias)
        self.shift = np.asarray(shift, dtype=float)
        self.bounds = Bounds.symmetric(dimension, DOMAIN_HALF_WIDTH)
        self.optimum_value = float(bias)

    def evaluate(self, x):
        X = np.asarray(x, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.dimension:
            raise DomainViolation(f"expected dimension {self.dimension}, got {X.shape[1]}")
        if np.abs(X).max(initial=0.0) > DOMAIN_HALF_WIDTH:
            raise DomainViolation(f"point outside [-{DOMAIN_HALF_WIDTH}, {DOMAIN_HALF_WIDTH}]^D")
        out = self._eval2d(X)
        return float(out[0]) if single else out

    def _eval2d(self, X):
        raise NotImplementedError


class SimpleProblem(BenchProblem):
    """bias + base(Q (scale (x - o))); rotation=None means no rotation."""

    def __init__(self, id, dimension, category, bias, shift, base: str,
                 rotation: Optional[np.ndarray]):
        super().__init__(id, dimension, category, bias, shift)
        self.base = base
        self.rotation = rotation
        self.scale = INPUT_SCALE[base]

    def _eval2d(self, X):
        Z = self.scale * (X - self.shift)
        if self.rotation is not None:
            Z = Z @ self.rotation.T
        return self.bias + BASE_FUNCTIONS[self.base](Z)


class HybridProblem(BenchProblem):
    """Shifted coordinates are permuted, cut into contiguous blocks and each
    block fed (scaled and block-rotated) to its own base function."""

    def __init__(self, id, dimension, bias, shift, permutation, blocks):
        super().__init__(id, dimension, "hybrid", bias, shift)
        self.permutation = np.asarray(permutation, dtype=np.int64)
        self.blocks = blocks        # list of (base, rotation, size)

    def _eval2d(self, X):
        Y = (X - self.shift)[:, self.permutation]
        total = np.zeros(X.shape[0])
        start = 0
        for base, rotation, size in self.blocks:
            Z = (INPUT_SCALE[base] * Y[:, start:start + size]) @ rotation.T
            total += BASE_FUNCTIONS[base](Z)
            start += size
        return self.bias + total


class CompositionProblem(BenchProblem):
    """Distance-weighted blend of shifted-rotated components.

    Weights w_k = exp(-|x - o_k|^2 / (2 D sigma_k^2)) / |x - o_k| are
    normalized to sum 1; sitting exactly on a component center collapses the
    weights to one-hot for that component (removable singularity).  The
    blended value is bias + sum_k w_k (lambda_k g_k(x) + b_k).
    """

    def __init__(self, id, dimension, bias, components):
        # the first component's center is the reference optimum location
        super().__init__(id, dimension, "composition", bias, components[0]["center"])
        self.components = components

    def _eval2d(self, X):
        B = X.shape[0]
        n = len(self.components)
        vals = np.empty((B, n))
        sqdist = np.empty((B, n))
        for k, comp in enumerate(self.components):
            Y = X - comp["center"]
            sqdist[:, k] = (Y * Y).sum(axis=1)
            Z = (INPUT_SCALE[comp["base"]] * Y) @ comp["rotation"].T
            vals[:, k] = comp["lam"] * BASE_FUNCTIONS[comp["base"]](Z) + comp["offset"]
        with np.errstate(divide="ignore"):
            w = np.exp(-sqdist / (2.0 * self.dimension * self._sigma_sq)) / np.sqrt(sqdist)
        at_center = sqdist == 0.0
        hit = at_center.any(axis=1)
        if hit.any():
            w[hit] = at_center[hit].astype(float)
        w /= w.sum(axis=1, keepdims=True)
        return self.bias + (w * vals).sum(axis=1)

    @property
    def _sigma_sq(self):
        return np.array([c["sigma"] ** 2 for c in self.components])


def _block_sizes(dimension: int, ratios=(0.3, 0.3, 0.4)) -> List[int]:
    nb = min(len(ratios), dimension)
    sizes = [max(1, round(r * dimension)) for r in ratios[:nb]]
    while sum(sizes) > dimension:
        sizes[sizes.index(max(sizes))] -= 1
    while sum(sizes) < dimension:
        sizes[-1] += 1
    return sizes


def _simple(rng, id, dimension, category, bias, base, rotated=True):
    shift = rng.uniform(-SHIFT_HALF_WIDTH, SHIFT_HALF_WIDTH, dimension)
    rotation = random_rotation(dimension, rng) if rotated else None
    return SimpleProblem(id, dimension, category, bias, shift, base, rotation)


def _hybrid(rng, id, dimension, bias, bases):
    shift = rng.uniform(-SHIFT_HALF_WIDTH, SHIFT_HALF_WIDTH, dimension)
    permutation = rng.shuffled(dimension)
    sizes = _block_sizes(dimension)
    blocks = [(base, random_rotation(size, rng), size)
              for base, size in zip(bases[: len(sizes)], sizes)]
    return HybridProblem(id, dimension, bias, shift, permutation, blocks)


def _composition(rng, id, dimension, bias, bases, sigmas, lams):
    components = []
    for k, (base, sigma, lam) in enumerate(zip(bases, sigmas, lams)):
        components.append({
            "base": base,
            "center": rng.uniform(-SHIFT_HALF_WIDTH, SHIFT_HALF_WIDTH, dimension),
            "rotation": random_rotation(dimension, rng),
            "sigma": sigma,
            "lam": lam,
            "offset": 0.0 if k == 0 else 100.0,
        })
    return CompositionProblem(id, dimension, bias, components)


def make_suite(dimension: int, seed: int) -> List[BenchProblem]:
    """The 12-problem suite: 2 unimodal, 6 multimodal, 2 hybrid, 2 composition."""
    if dimension < 2:
        raise ValueError("suite needs dimension >= 2")
    rng = RandomSource(seed)
    problems = [
        _simple(rng, "u01_rot_elliptic", dimension, "unimodal", 100.0, "elliptic"),
        _simple(rng, "u02_rot_bent_cigar", dimension, "unimodal", 200.0, "bent_cigar"),
        _simple(rng, "m03_sr_rosenbrock", dimension, "multimodal", 300.0, "rosenbrock"),
        _simple(rng, "m04_sr_ackley", dimension, "multimodal", 400.0, "ackley"),
        _simple(rng, "m05_sr_rastrigin", dimension, "multimodal", 500.0, "rastrigin"),
        _simple(rng, "m06_sr_griewank", dimension, "multimodal", 600.0, "griewank"),
        _simple(rng, "m07_sr_mod_schwefel", dimension, "multimodal", 700.0, "mod_schwefel"),
        _simple(rng, "m08_shift_rastrigin", dimension, "multimodal", 800.0, "rastrigin",
                rotated=False),
        _hybrid(rng, "h09_hyb_schw_rast_elli", dimension, 900.0,
                ("mod_schwefel", "rastrigin", "elliptic")),
        _hybrid(rng, "h10_hyb_grie_ackl_rose", dimension, 1000.0,
                ("griewank", "ackley", "rosenbrock")),
        _composition(rng, "c11_comp_rast_grie_schw", dimension, 1100.0,
                     ("rastrigin", "griewank", "mod_schwefel"),
                     sigmas=(10.0, 20.0, 30.0), lams=(1.0, 10.0, 1.0)),
        _composition(rng, "c12_comp_ackl_rose_sphe", dimension, 1200.0,
                     ("ackley", "rosenbrock", "sphere"),
                     sigmas=(10.0, 30.0, 50.0), lams=(10.0, 1.0, 2.5e-3)),
    ]
    return problems


def suite_manifest(dimension: int, seed: int, problems=None) -> dict:
    """JSON-ready description of the suite for report reproducibility."""
    problems = problems if problems is not None else make_suite(dimension, seed)
    return {
        "schema": "mlccde-suite-v1",
        "dimension": dimension,
        "seed": seed,
        "domain": [-DOMAIN_HALF_WIDTH, DOMAIN_HALF_WIDTH],
        "problems": [
            {"id": p.id, "category": p.category, "bias": p.bias}
            for p in problems
        ],
    }
