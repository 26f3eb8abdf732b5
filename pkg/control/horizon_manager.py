"""
Horizon Manager - stabilizing horizon and suboptimality index of MPC without terminal conditions.
"""
import math
from typing import Dict

import numpy as np

from network.models import HorizonCertificate
from utils.constants import DEFAULT_N_MAX, HORIZON_EPSILON
from utils.exceptions import GammaBelowOne, InputError
from utils.validators import validate_alpha_target, validate_gamma


class HorizonManager:
    """Evaluates N0, alpha_N and the closed-loop performance bound for a given gamma."""

    def __init__(self, gamma: float):
        """Initialize with the bound gamma >= 1 of V_N(x) <= gamma s'x."""
        valid, msg = validate_gamma(gamma)
        if not valid:
            raise GammaBelowOne(msg)
        self.gamma = float(gamma)

    @property
    def _degenerate(self) -> bool:
        return self.gamma <= 1.0 + HORIZON_EPSILON

    def horizon_threshold(self) -> float:
        """2 + ln(gamma-1) / (ln gamma - ln(gamma-1)); N must exceed it."""
        if self._degenerate:
            return 1.0
        g = self.gamma
        return 2.0 + math.log(g - 1.0) / (math.log(g) - math.log(g - 1.0))

    def minimal_horizon(self) -> int:
        """Smallest integer N > threshold, never below 2."""
        if self._degenerate:
            return 2
        threshold = self.horizon_threshold()
        n0 = math.floor(threshold + HORIZON_EPSILON) + 1
        return max(2, n0)

    def alpha(self, N: int) -> float:
        """alpha_N = 1 - (g-1)^N / (g^(N-1) - (g-1)^(N-1)), evaluated with log differences."""
        if N < 2:
            raise InputError(f"Horizon must be >= 2 for alpha, got {N}")
        if self._degenerate:
            return 1.0
        g = self.gamma
        log_ratio = math.log(g - 1.0) - math.log(g)
        # numerator / denominator = exp(N ln(g-1) - (N-1) ln g) / (1 - exp((N-1) log_ratio))
        head = N * math.log(g - 1.0) - (N - 1) * math.log(g)
        return 1.0 - math.exp(head) / -math.expm1((N - 1) * log_ratio)

    def alpha_direct(self, N: int) -> float:
        """Plain-power evaluation; overflows for large N."""
        g = self.gamma
        return 1.0 - (g - 1.0) ** N / (g ** (N - 1) - (g - 1.0) ** (N - 1))

    def smallest_horizon_for_alpha(self, alpha_target: float) -> int:
        """Smallest N >= max(2, N0) with alpha_N > alpha_target."""
        valid, msg = validate_alpha_target(alpha_target)
        if not valid:
            raise InputError(msg)
        N = self.minimal_horizon()
        while self.alpha(N) <= alpha_target:
            N += 1
        return N

    def alpha_table(self, n_max: int = DEFAULT_N_MAX) -> Dict[int, float]:
        """alpha_N for N0 <= N <= n_max."""
        n0 = self.minimal_horizon()
        return {N: self.alpha(N) for N in range(n0, max(n0, n_max) + 1)}

    def certificate(self, n_max: int = DEFAULT_N_MAX) -> HorizonCertificate:
        return HorizonCertificate(gamma=self.gamma, n0=self.minimal_horizon(),
                                  alpha_table=self.alpha_table(n_max))

    @staticmethod
    def performance_bound(p_hat: np.ndarray, alpha_N: float, x0: np.ndarray) -> float:
        """p-hat'x0 / alpha_N, an upper bound on the MPC closed-loop cost from x0."""
        if not (0.0 < alpha_N <= 1.0):
            raise InputError(f"alpha_N must lie in (0, 1], got {alpha_N}")
        return float(np.asarray(p_hat) @ np.asarray(x0)) / alpha_N
