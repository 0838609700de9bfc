"""Protocol parameters with validation and truncation auto-raise."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .exceptions import InvalidDimensionError, InvalidParameterError, TruncationError
from .fock import GUARD, TAIL_TOL
from .gaussification import CONV_TOL, MAX_ITERS
from .gaussian import DIM_CAP, suggested_dim

DIM_STEP = 8


@dataclass(frozen=True)
class DistillationConfig:
    """All physical and numerical parameters of a protocol run.

    ``delta_sq=None`` means "use the optimal value"; ``dim=None`` means "pick
    the smallest truncation-clean cutoff".
    """

    r: float = 0.5
    delta_sq: float | None = None
    T: float = 1.0
    alpha: complex | None = None
    eta: float = 1.0
    target_vy: float | None = None
    dim: int | None = None
    max_iters: int = MAX_ITERS
    conv_tol: float = CONV_TOL
    tail_tol: float = TAIL_TOL
    guard: int = GUARD
    dim_cap: int = DIM_CAP

    def __post_init__(self):
        for name in ("r", "T", "eta", "conv_tol", "tail_tol"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise InvalidParameterError(f"{name} must be a finite number", **{name: v})
        if self.delta_sq is not None and not math.isfinite(self.delta_sq):
            raise InvalidParameterError("delta_sq must be finite", delta_sq=self.delta_sq)
        if not 0.0 < self.T <= 1.0:
            raise InvalidParameterError("transmittance must lie in (0, 1]", T=self.T)
        if not 0.0 <= self.eta <= 1.0:
            raise InvalidParameterError("detector efficiency must lie in [0, 1]", eta=self.eta)
        if self.target_vy is not None and not (0.0 < self.target_vy and math.isfinite(self.target_vy)):
            raise InvalidParameterError("target variance must be positive", target_vy=self.target_vy)
        if self.dim is not None and not 2 <= self.dim <= self.dim_cap:
            raise InvalidDimensionError(f"dim must lie in [2, {self.dim_cap}]", dim=self.dim)
        if self.max_iters < 0:
            raise InvalidParameterError("max_iters must be non-negative", max_iters=self.max_iters)
        if self.conv_tol <= 0 or self.tail_tol <= 0:
            raise InvalidParameterError("tolerances must be positive",
                                        conv_tol=self.conv_tol, tail_tol=self.tail_tol)
        if self.guard < 1:
            raise InvalidParameterError("guard band must hold at least one level", guard=self.guard)

    def start_dim(self, r: float | None = None) -> int:
        """User dim, or the smallest cutoff holding |psi(r)> cleanly."""
        if self.dim is not None:
            return self.dim
        r = self.r if r is None else r
        return suggested_dim(r, self.guard, self.tail_tol, cap=self.dim_cap)

    def to_dict(self) -> dict:
        d = asdict(self)
        if isinstance(d["alpha"], complex):
            d["alpha"] = {"re": d["alpha"].real, "im": d["alpha"].imag}
        return d


def auto_raise(run, start: int, cap: int = DIM_CAP, step: int = DIM_STEP):
    """Call ``run(dim)`` with growing dim until it reports a clean truncation.

    ``run`` returns ``(result, clean)``.  Raises TruncationError past ``cap``.
    """
    dim = max(int(start), 2)
    while True:
        result, clean = run(dim)
        if clean:
            return result, dim
        if dim >= cap:
            raise TruncationError(f"output not truncation-clean at the cap dim={cap}",
                                  suggested_dim=None, dim=dim, cap=cap)
        dim = min(dim + step, cap)
