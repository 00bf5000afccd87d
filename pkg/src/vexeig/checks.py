"""Record type shared by every numerical verification."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Check:
    """Outcome of one inequality check ``lhs <= rhs``.

    ``margin`` is ``rhs - lhs``; ``passed`` allows a relative slack ``rtol``
    scaled by ``max(|lhs|, |rhs|)``.
    """

    name: str
    passed: bool
    lhs: float
    rhs: float
    margin: float
    note: str = ""
    # advisory checks are reported but do not decide overall success
    advisory: bool = False

    def __bool__(self) -> bool:
        return self.passed


def le(name: str, lhs: float, rhs: float, rtol: float = 0.0, atol: float = 0.0, note: str = "",
       advisory: bool = False) -> Check:
    lhs, rhs = float(lhs), float(rhs)
    slack = rtol * max(abs(lhs), abs(rhs)) + atol
    return Check(name, bool(lhs <= rhs + slack), lhs, rhs, rhs - lhs, note, advisory)
