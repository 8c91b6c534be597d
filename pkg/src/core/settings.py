import logging
import os
from typing import Optional

from pydantic import BaseModel, Field

logger = logging.getLogger(__name__)

# 数值默认值
DEFAULT_TOL = 1e-9
DEFAULT_BUDGET = 10_000
DEFAULT_SEED = 42
NULLSPACE_TOL = 1e-10
PINV_COND_TOL = 1e-10
TAU_LO = 1e-12
TAU_HI = 1.0 - 1e-12
TAU_WIDTH = 1e-12
SFL1_SLACK = 1e-8
ASCENT_STEPS = 200
DEFAULT_WORKERS = 4

THREADS_ENV = "ORECOVER_THREADS"


def worker_count() -> int:
    """逐轴线程池大小，由 ORECOVER_THREADS 限定。"""
    raw = os.getenv(THREADS_ENV, "").strip()
    if not raw:
        return DEFAULT_WORKERS
    try:
        value = int(raw)
    except ValueError:
        logger.warning(f"[Config] Ignoring {THREADS_ENV}={raw!r}: not an integer")
        return DEFAULT_WORKERS
    if value < 1:
        logger.warning(f"[Config] Ignoring {THREADS_ENV}={value}: must be >= 1")
        return DEFAULT_WORKERS
    return value


class RunSettings(BaseModel):
    """一次 CLI 调用的参数，已与环境变量合并。"""

    tol: float = Field(default=DEFAULT_TOL, gt=0)
    budget: int = Field(default=DEFAULT_BUDGET, ge=1)
    seed: int = DEFAULT_SEED
    workers: int = Field(default=DEFAULT_WORKERS, ge=1)
    full_m_table: bool = False
    json_out: Optional[str] = None

    @classmethod
    def from_flags(cls, tol: Optional[float] = None, budget: Optional[int] = None,
                   seed: Optional[int] = None, full_m_table: bool = False,
                   json_out: Optional[str] = None) -> "RunSettings":
        return cls(
            tol=DEFAULT_TOL if tol is None else tol,
            budget=DEFAULT_BUDGET if budget is None else budget,
            seed=DEFAULT_SEED if seed is None else seed,
            workers=worker_count(),
            full_m_table=full_m_table,
            json_out=json_out,
        )
