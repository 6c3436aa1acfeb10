"""Numerical tolerances used across the library.

A config's ``tolerances`` mapping is checked against these names and echoed
into the report; functions take explicit tolerance arguments defaulting to
the values here.
"""
from dataclasses import dataclass, fields, replace

from .errors import InvalidConfigError


@dataclass(frozen=True)
class Tolerances:
    hermitian_atol: float = 1e-12
    eig_imag: float = 1e-9
    det_imag: float = 1e-9
    unitary: float = 1e-10
    norm: float = 1e-9
    dual_det_rel: float = 1e-8
    lp_gap: float = 1e-7
    kwise: float = 1e-7
    prob_sum: float = 1e-10
    coupling_sum: float = 1e-9

    def updated(self, overrides: dict | None) -> "Tolerances":
        if not overrides:
            return self
        known = {f.name for f in fields(self)}
        bad = set(overrides) - known
        if bad:
            raise InvalidConfigError(f"unknown tolerance(s): {sorted(bad)}")
        return replace(self, **{k: float(v) for k, v in overrides.items()})


DEFAULT = Tolerances()
