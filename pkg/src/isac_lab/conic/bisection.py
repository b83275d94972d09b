"""Bisection over a monotone feasibility oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable


class BracketError(ValueError):
    pass


@dataclass
class BisectionResult:
    value: float
    lower: float
    upper: float
    iterations: int
    trace: list = field(default_factory=list)


def bisect_feasibility(oracle: Callable[[float], bool], t_low: float, t_high: float,
                       tol: float, check_upper: bool = True) -> BisectionResult:
    """Locate the feasibility threshold of a monotone oracle.

    ``oracle(t)`` must be feasible for every ``t`` above some threshold.
    The bracket ``[t_low, t_high]`` is halved until its width is at most
    ``tol``; the midpoint of the final bracket is returned together with
    the bracket itself and a trace of ``(t, feasible)`` pairs. The upper
    end of the returned bracket is always a point the oracle accepted.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if t_high < t_low:
        raise BracketError("t_high below t_low")
    trace = []
    if check_upper:
        ok = bool(oracle(t_high))
        trace.append((t_high, ok))
        if not ok:
            raise BracketError("no feasible point at upper bound")
    lo, hi = float(t_low), float(t_high)
    limit = max(0, math.ceil(math.log2((hi - lo) / tol))) if hi > lo else 0
    it = 0
    while hi - lo > tol and it < limit:
        mid = 0.5 * (lo + hi)
        ok = bool(oracle(mid))
        trace.append((mid, ok))
        if ok:
            hi = mid
        else:
            lo = mid
        it += 1
    return BisectionResult(0.5 * (lo + hi), lo, hi, it, trace)
