"""Empirical probes of the hypotheses behind the candidate rate functional.

None of these assert a theorem; they measure and report.
"""

import math
from dataclasses import dataclass

import numpy as np

from .kron_embedding import DiscretePath, batch_scaled_action, path_distance, scaled_action
from .urn_model import UrnSpec, batch_action, simulate_batch
from .variational import cramer_local_rate, local_rate_array


@dataclass
class ActionConvergence:
    Ns: tuple
    median_gaps: tuple

    @property
    def monotone(self):
        g = self.median_gaps
        return all(b < a for a, b in zip(g, g[1:]))


def action_convergence(spec, Ns=(100, 1000, 10000), seeds=100, seed=0, floor=0.0, threads=1):
    """Median over simulated histories of ``|action/N - scaled_action(embedding)|``.

    The embedded path of a history has cell velocities equal to the
    increments themselves, so they are used directly.
    """
    gaps = []
    for i, N in enumerate(Ns):
        steps = simulate_batch(spec, N, seeds, seed=[seed, i], threads=threads)
        act = batch_action(spec, steps) / N
        phi = batch_scaled_action(spec, steps.astype(float), floor)
        gaps.append(float(np.median(np.abs(act - phi))))
    return ActionConvergence(tuple(Ns), tuple(gaps))


def tv_continuity(spec, path, epsilons=(1e-1, 1e-2, 1e-3, 1e-4), floor=0.0):
    """Change of the scaled action when one interior node moves by ``eps``.

    The node with the most slack on both sides is moved (upwards when
    possible) so the perturbed path stays admissible. Returns rows
    ``(eps, distance, |delta Phi|, eps + eps*log(1/eps))``; the last column
    is the reference modulus, reported for comparison only.
    """
    values = path.values
    T, K = path.T, path.K
    vel = path.velocities
    slack_up = np.minimum(K - vel[:-1], vel[1:]) / T
    slack_dn = np.minimum(vel[:-1], K - vel[1:]) / T
    slack = np.maximum(slack_up, slack_dn)
    j = int(np.argmax(slack)) + 1
    sign = 1.0 if slack_up[j - 1] >= slack_dn[j - 1] else -1.0
    base = scaled_action(spec, path, floor)
    rows = []
    for eps in epsilons:
        if eps > slack[j - 1]:
            continue
        moved = values.copy()
        moved[j] += sign * eps
        other = DiscretePath(moved, K)
        delta = abs(scaled_action(spec, other, floor) - base)
        rows.append((eps, path_distance(path, other), delta, eps + eps * math.log(1 / eps)))
    return rows


@dataclass
class CramerReport:
    alphas: np.ndarray
    betas: np.ndarray
    local: np.ndarray
    cramer: np.ndarray

    @property
    def finite(self):
        return np.isfinite(self.local)

    @property
    def min_excess(self):
        """Smallest ``local - cramer`` over grid points with a finite local rate."""
        mask = self.finite
        return float((self.local - self.cramer)[mask].min()) if mask.any() else math.nan

    @property
    def dominates(self):
        return bool(self.min_excess >= -1e-9)

    def rows(self):
        for i, a in enumerate(self.alphas):
            for j, b in enumerate(self.betas):
                yield a, b, self.local[i, j], self.cramer[i, j]


def cramer_discrepancy(spec, grid=64, floor=0.0):
    """Candidate local rate and Cramer rate on a ``grid x grid`` mesh of ``[0, K]^2``."""
    alphas = np.linspace(0.0, spec.K, grid)
    betas = np.linspace(0.0, spec.K, grid)
    A, B = np.meshgrid(alphas, betas, indexing="ij")
    with np.errstate(invalid="ignore"):
        local = local_rate_array(spec, A, B, floor)
    cramer = np.array([[cramer_local_rate(spec, float(a), float(b)) for b in betas]
                       for a in alphas])
    return CramerReport(alphas, betas, local, cramer)


def degenerate_spec():
    """K = 2 urn with ``pi_0 = pi_2 = 1/2`` and ``pi_1 = 0``."""
    return UrnSpec.constant([0.0, 0.5])
