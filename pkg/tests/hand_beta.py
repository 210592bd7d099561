"""Hand-written coupling betas for truncation orders up to four.

Each line is the ``phi^n`` coefficient of ``-(Lambda/2 pi) log(1 + V''/Lambda^2)``
times ``n!``, expanded by hand with ``D = Lambda^2 + a_2``.  Couplings
above the truncation order are zero.  These serve as an independent
reference for the generated betas.
"""

from __future__ import annotations

import math

import numpy as np


def hand_beta(lam: float, a) -> list:
    a = list(a) + [0.0] * (7 - len(a))
    a2, a3, a4, a5, a6 = a[2], a[3], a[4], a[5], a[6]
    D = lam * lam + a2
    k = -lam / (2.0 * math.pi)
    return [
        k * math.log(D / (lam * lam)),
        k * a3 / D,
        k * (a4 / D - a3**2 / D**2),
        k * (a5 / D - 3.0 * a3 * a4 / D**2 + 2.0 * a3**3 / D**3),
        k * (a6 / D - (4.0 * a3 * a5 + 3.0 * a4**2) / D**2 + 12.0 * a3**2 * a4 / D**3 - 6.0 * a3**4 / D**4),
    ]


def random_states(n, order, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        lam = rng.uniform(0.5, 2.0)
        a = rng.uniform(-1.0, 1.0, order + 1)
        a[2] = rng.uniform(0.1, 10.0) - lam * lam  # Lambda^2 + a_2 in (0.1, 10)
        yield lam, a


def beta_discrepancy(order, n=1000, seed=0) -> float:
    """Worst ``|generated - hand| / max(1, |hand|)`` over ``n`` random states.

    Near ``Lambda^2 + a_2 = 0.1`` the quartic beta reaches ~1e4, where one
    unit in the last place is already ~2e-12, so the bound is absolute for
    betas of order one and relative above.
    """
    from whflow.coupling_flow import CouplingVector, beta_couplings

    worst = 0.0
    for lam, a in random_states(n, order, seed):
        got = beta_couplings(CouplingVector(lam, a))
        want = np.array(hand_beta(lam, a)[: order + 1])
        worst = max(worst, float(np.max(np.abs(got - want) / np.maximum(1.0, np.abs(want)))))
    return worst
