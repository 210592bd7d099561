"""Flow configuration, termination records and cutoff-tail integrals."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class FlowConfig:
    """Settings shared by the grid and coupling flows.

    The flow runs in ``s = ln(lambda0 / Lambda)`` from ``lambda0`` down to
    ``lambda_ir``.  ``uv_completion`` adds the analytic shell integral for
    ``Lambda > lambda0`` to the initial potential (bare curvature frozen);
    ``ir_completion`` adds the remaining ``0 < Lambda < lambda_ir`` shell to
    the effective potential with the final curvature frozen.  Together they
    remove the finite-window error of order ``V''/lambda0`` and
    ``lambda_ir log(1/lambda_ir)``.

    ``method`` drives the grid PDE (stiff near the spinodal, hence the
    implicit Radau IIA pair); ``series_method`` drives the small coupling
    systems.  ``spinodal_guard`` is the grid's floor on ``1 + V''/Lambda^2``;
    the coupling flows stop at the looser ``pole_guard`` because every
    coupling above ``a_2`` diverges at the pole and the last decades of the
    approach cost orders of magnitude more steps without moving the stop.
    """

    lambda0: float = 100.0
    lambda_ir: float = 1e-3
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    snapshot_schedule: tuple | None = None
    snapshots_per_decade: int = 5
    spinodal_guard: float = 1e-10
    pole_guard: float = 1e-6
    method: str = "Radau"
    series_method: str = "LSODA"
    uv_completion: bool = True
    ir_completion: bool = True

    def __post_init__(self):
        if not 0 < self.lambda_ir < self.lambda0:
            raise ValueError(f"need 0 < lambda_ir < lambda0, got {self.lambda_ir}, {self.lambda0}")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not (self.spinodal_guard > 0 and self.pole_guard > 0):
            raise ValueError("spinodal_guard and pole_guard must be positive")
        if self.snapshot_schedule is not None:
            object.__setattr__(self, "snapshot_schedule", tuple(float(v) for v in self.snapshot_schedule))

    @property
    def s_final(self) -> float:
        return math.log(self.lambda0 / self.lambda_ir)

    def cutoff(self, s):
        return self.lambda0 * np.exp(-np.asarray(s, dtype=float))

    def schedule_s(self) -> np.ndarray:
        """Snapshot positions in ``s`` (always includes both endpoints)."""
        if self.snapshot_schedule is None:
            decades = math.log10(self.lambda0 / self.lambda_ir)
            n = max(2, int(math.ceil(decades * self.snapshots_per_decade)) + 1)
            s = np.linspace(0.0, self.s_final, n)
        else:
            lam = np.array([v for v in self.snapshot_schedule if self.lambda_ir <= v <= self.lambda0])
            s = np.log(self.lambda0 / lam) if lam.size else np.array([])
            s = np.concatenate([[0.0], s, [self.s_final]])
        return np.unique(np.clip(s, 0.0, self.s_final))

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["snapshot_schedule"] is not None:
            d["snapshot_schedule"] = list(d["snapshot_schedule"])
        return d


@dataclass(frozen=True)
class Termination:
    """How a flow ended: ``completed``, ``spinodal`` or ``step_underflow``."""

    kind: str
    lam: float | None = None
    x: float | None = None
    message: str = ""

    @property
    def completed(self) -> bool:
        return self.kind == "completed"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lambda": self.lam, "x": self.x, "message": self.message}


class SpinodalError(ArithmeticError):
    """``1 + V''/Lambda^2`` dropped below the guard (mass-pole singularity)."""

    def __init__(self, lam: float, x: float | None = None, detail: str = ""):
        self.lam = lam
        self.x = x
        where = f" at x = {x:.6g}" if x is not None else ""
        super().__init__(f"spinodal reached at Lambda = {lam:.6g}{where}{detail}")


def _shell_antiderivative(c: np.ndarray, lam: float) -> np.ndarray:
    # A(L) = L log(1 + c/L^2) + 2 sqrt(c) atan(L/sqrt c)    (c > 0)
    #      = L log(1 - k^2/L^2) + 2 k atanh(k/L)            (c = -k^2 < 0)
    out = np.zeros_like(c)
    pos = c > 0
    neg = c < 0
    if math.isinf(lam):
        out[pos] = math.pi * np.sqrt(c[pos])
        return out
    if lam == 0.0:
        return out
    sp = np.sqrt(c[pos])
    out[pos] = lam * np.log1p(c[pos] / lam**2) + 2.0 * sp * np.arctan(lam / sp)
    k = np.sqrt(-c[neg])
    out[neg] = lam * np.log1p(-(k / lam) ** 2) + 2.0 * k * np.arctanh(k / lam)
    return out


def cutoff_shell_integral(c, lo: float, hi: float):
    """Closed form of ``int_lo^hi log(1 + c / L^2) dL`` for curvature ``c``.

    ``hi`` may be ``inf``.  Requires ``c > -lo**2`` (finite integrand).
    """
    arr = np.asarray(c, dtype=float)
    flat = np.atleast_1d(arr).astype(float)
    if lo > 0 and np.any(flat <= -lo * lo):
        raise SpinodalError(lo, detail=" (shell integral below the pole)")
    if lo == 0 and np.any(flat < 0):
        raise ValueError("shell integral down to Lambda = 0 needs non-negative curvature")
    val = _shell_antiderivative(flat, hi) - _shell_antiderivative(flat, lo)
    return val.reshape(arr.shape) if arr.shape else float(val[0])
