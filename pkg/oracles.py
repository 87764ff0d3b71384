"""
Brute-force oracle suites: the dual-ball supremum defining the Orlicz norm
maximized directly, and matrix inertia against a dense eigensolver.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from errors import SpectralError
from inertia import count_negative_matrix, negative_count_spectral
from orlicz import (B_FUNCTION, MeasuredFunction, NFunction, average_orlicz_norm, luxemburg_norm,
                    modular, orlicz_norm)
from potentials import random_catalog
from strip_solver import StripGrid, assemble_form, count_negative

logger = logging.getLogger(__name__)

DIRECTIONS = 4000
POLISH_ROUNDS = 60
POLISH_BATCH = 256
ORLICZ_RTOL = 1e-3
EQUIVALENCE_SLACK = 1e-9
HOLDER_SLACK = 1e-6


@dataclass
class OracleResult:
    suite: str
    cases: int = 0
    failures: List[str] = field(default_factory=list)
    worst: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.failures

    def fail(self, message: str):
        logger.error(f"❌ {self.suite}: {message}")
        self.failures.append(message)


def _dual_values(f: MeasuredFunction, psi: NFunction, directions: np.ndarray, level: float) -> np.ndarray:
    """Σ|f|·g·w for g = t·direction on the boundary Σ Φ(g) w = level, one row per direction."""
    phi = psi.complement
    weights = f.weights

    def excess(t: np.ndarray) -> np.ndarray:
        return np.sum(phi(t[:, None] * directions) * weights, axis=1) - level

    lo, hi = np.zeros(len(directions)), np.ones(len(directions))
    while True:
        short = excess(hi) < 0
        if not np.any(short):
            break
        hi[short] *= 2.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        below = excess(mid) < 0
        lo, hi = np.where(below, mid, lo), np.where(below, hi, mid)
    return lo * (directions @ (np.abs(f.values) * weights))


def dual_ball_sup(f: MeasuredFunction, psi: NFunction, level: float = 1.0,
                  rng: Optional[np.random.Generator] = None, directions: int = DIRECTIONS) -> float:
    """sup{Σ|f|g w : g ≥ 0, Σ Φ(g) w ≤ level} by random directions plus a local search."""
    rng = rng or np.random.default_rng(0)
    atoms = f.values.size
    samples = rng.dirichlet(np.ones(atoms), size=directions)
    samples = np.vstack([samples, np.eye(atoms), np.abs(f.values)[None, :] / max(f.sup_norm, 1e-300)])
    scores = _dual_values(f, psi, samples, level)
    best = samples[int(np.argmax(scores))]

    # shrinking Gaussian search on the log-weights around the best direction
    logits = np.log(np.maximum(best, 1e-12))
    top, sigma = float(np.max(scores)), 0.5
    for _ in range(POLISH_ROUNDS):
        trial = logits + sigma * rng.standard_normal((POLISH_BATCH, atoms))
        trial_dirs = np.exp(trial - trial.max(axis=1, keepdims=True))
        trial_scores = _dual_values(f, psi, trial_dirs, level)
        k = int(np.argmax(trial_scores))
        if trial_scores[k] > top:
            top, logits = float(trial_scores[k]), trial[k]
        else:
            sigma *= 0.6
    return top


def _random_function(rng: np.random.Generator, max_atoms: int = 6, measure: Optional[float] = None) -> MeasuredFunction:
    atoms = int(rng.integers(1, max_atoms + 1))
    values = rng.exponential(2.0, size=atoms) * rng.choice([0.1, 1.0, 10.0])
    weights = rng.uniform(0.05, 1.0, size=atoms)
    if measure is not None:
        weights *= measure / weights.sum()
    return MeasuredFunction(values, weights)


def orlicz_suite(cases: int = 100, seed: int = 0) -> OracleResult:
    """Amemiya route vs dual-ball maximization, plus the Luxemburg sandwich, its implications and Hölder."""
    rng = np.random.default_rng(seed)
    result = OracleResult('orlicz')
    for k in range(cases):
        f = _random_function(rng)
        result.cases += 1
        amemiya = orlicz_norm(f, B_FUNCTION)
        brute = dual_ball_sup(f, B_FUNCTION, 1.0, rng)
        error = abs(amemiya - brute) / max(amemiya, 1e-300)
        result.worst = max(result.worst, error)
        if error > ORLICZ_RTOL:
            result.fail(f"case {k}: Amemiya {amemiya:.8g} vs dual {brute:.8g}")

        lux = luxemburg_norm(f, B_FUNCTION)
        if not (lux <= amemiya * (1 + EQUIVALENCE_SLACK) and amemiya <= 2 * lux * (1 + EQUIVALENCE_SLACK)):
            result.fail(f"case {k}: sandwich {lux:.8g} <= {amemiya:.8g} <= 2·{lux:.8g} fails")
        if lux > max(1.0, modular(f, B_FUNCTION, 1.0)) + EQUIVALENCE_SLACK:
            result.fail(f"case {k}: Luxemburg norm {lux:.8g} exceeds max(1, modular at 1)")
        kappa = float(rng.uniform(0.1, 10.0)) * max(lux, 1e-12)
        bound = modular(f, B_FUNCTION, kappa)
        if math.isfinite(bound) and lux > max(1.0, bound) * kappa + EQUIVALENCE_SLACK:
            result.fail(f"case {k}: Luxemburg norm {lux:.8g} exceeds {max(1.0, bound):.4g}·κ")

        partner = MeasuredFunction(rng.exponential(1.0, size=f.values.size), f.weights)
        pairing = abs(f.integral_against(partner))
        holder = amemiya * luxemburg_norm(partner, B_FUNCTION.complement)
        if pairing > holder * (1 + HOLDER_SLACK):
            result.fail(f"case {k}: pairing {pairing:.8g} exceeds the Hölder bound {holder:.8g}")

        level = (0.5, 1.0, 2.0)[k % 3]
        g = _random_function(rng, measure=level)
        averaged = average_orlicz_norm(g, B_FUNCTION)
        brute_avg = dual_ball_sup(g, B_FUNCTION, level, rng)
        error = abs(averaged - brute_avg) / max(averaged, 1e-300)
        result.worst = max(result.worst, error)
        if error > ORLICZ_RTOL:
            result.fail(f"case {k}: averaged {averaged:.8g} vs dual {brute_avg:.8g} at level {level}")
    logger.info(f"🎯 orlicz suite: {result.cases} cases, worst relative error {result.worst:.2e}")
    return result


def _random_symmetric(rng: np.random.Generator, size: int) -> np.ndarray:
    M = rng.standard_normal((size, size))
    return 0.5 * (M + M.T) + rng.uniform(-2, 2) * np.eye(size)


def inertia_suite(cases: int = 50, seed: int = 0, grids: int = 5) -> OracleResult:
    """LDLᵀ inertia vs dense spectra on random matrices and on assembled strip problems."""
    rng = np.random.default_rng(seed)
    result = OracleResult('inertia')
    for k in range(cases):
        size = int(rng.integers(1, 201))
        A = _random_symmetric(rng, size)
        result.cases += 1
        try:
            fast = count_negative_matrix(A)
        except SpectralError as e:
            result.fail(f"matrix {k}: {e}")
            continue
        exact = negative_count_spectral(A)
        if fast != exact:
            result.fail(f"matrix {k} (size {size}): inertia {fast} vs spectrum {exact}")
    for V in random_catalog(1.0, rng, grids):
        grid = StripGrid(1.0, 6.0, 60, 20)
        problem = assemble_form(V, grid, float(rng.uniform(1, 10)))
        result.cases += 1
        fast, exact = count_negative(problem), negative_count_spectral(problem.matrix)
        if fast != exact:
            result.fail(f"{V!r}: block inertia {fast} vs spectrum {exact}")
    logger.info(f"🎯 inertia suite: {result.cases} cases, {len(result.failures)} mismatches")
    return result


SUITES = {'orlicz': orlicz_suite, 'inertia': inertia_suite}
