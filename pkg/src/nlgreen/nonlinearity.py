"""Absorption nonlinearities ``g``: nondecreasing, continuous, ``g(0) = 0``."""
from __future__ import annotations

import numpy as np
from scipy.interpolate import PchipInterpolator

from .exceptions import NonlinearityError

POWER = "power"
TABLE = "table"
SATURATING = "saturating"


class Nonlinearity:
    """Callable absorption term.

    Use the constructors :meth:`power`, :meth:`linear`, :meth:`table` and
    :meth:`saturating`; each one audits monotonicity and ``g(0) = 0`` on a
    sign-spanning sample.

    Attributes
    ----------
    kind : str
        ``"power"``, ``"table"`` or ``"saturating"``.
    params : dict
        Constructor parameters (round-trip through :meth:`to_dict`).
    """

    def __init__(self, kind, fun, dfun, params, growth):
        self.kind = kind
        self._f = fun
        self._df = dfun
        self.params = params
        #: exponent ``p`` with ``|g(t)| ~ |t|^p`` as ``|t| -> inf``
        self.growth = growth
        self.audit()

    def __call__(self, t):
        return self._f(np.asarray(t, dtype=float))

    def derivative(self, t):
        return self._df(np.asarray(t, dtype=float))

    def __repr__(self):
        return f"Nonlinearity({self.kind}, {self.params})"

    # constructors ---------------------------------------------------------
    @classmethod
    def power(cls, p: float) -> "Nonlinearity":
        """Odd power ``g(t) = |t|^{p-1} t``, ``p > 0``."""
        p = float(p)
        if not p > 0:
            raise NonlinearityError(f"power exponent must be positive, got {p}")

        def f(t):
            return np.sign(t) * np.abs(t) ** p

        def df(t):
            if p == 1.0:
                return np.ones_like(t)
            with np.errstate(divide="ignore"):
                return p * np.abs(t) ** (p - 1)
        return cls(POWER, f, df, {"p": p}, p)

    @classmethod
    def linear(cls) -> "Nonlinearity":
        return cls.power(1.0)

    @classmethod
    def table(cls, t, g) -> "Nonlinearity":
        """Monotone PCHIP interpolant through ``(t_k, g_k)``, extended linearly.

        The table must be nondecreasing and contain ``t = 0`` with ``g = 0``.
        """
        t = np.asarray(t, dtype=float)
        g = np.asarray(g, dtype=float)
        if t.ndim != 1 or t.shape != g.shape or t.size < 2:
            raise NonlinearityError("table needs two equal-length 1-D arrays")
        if np.any(np.diff(t) <= 0):
            raise NonlinearityError("table abscissae must be strictly increasing")
        if np.any(np.diff(g) < 0):
            raise NonlinearityError("table values must be nondecreasing")
        k0 = np.flatnonzero(t == 0.0)
        if k0.size != 1 or g[k0[0]] != 0.0:
            raise NonlinearityError("table must contain the point (0, 0)")
        ip = PchipInterpolator(t, g, extrapolate=False)
        dip = ip.derivative()
        lo, hi = t[0], t[-1]
        sl_lo, sl_hi = float(dip(lo)), float(dip(hi))

        def f(x):
            y = ip(np.clip(x, lo, hi))
            return np.where(x > hi, g[-1] + sl_hi * (x - hi), np.where(x < lo, g[0] + sl_lo * (x - lo), y))

        def df(x):
            return np.where(x > hi, sl_hi, np.where(x < lo, sl_lo, dip(np.clip(x, lo, hi))))
        growth = 1.0 if (sl_hi > 0 or sl_lo > 0) else 0.0
        return cls(TABLE, f, df, {"t": t.tolist(), "g": g.tolist()}, growth)

    @classmethod
    def saturating(cls, a: float = 1.0, b: float = 1.0) -> "Nonlinearity":
        """Bounded ``g(t) = a tanh(t / b)``."""
        a, b = float(a), float(b)
        if not (a > 0 and b > 0):
            raise NonlinearityError("saturating parameters must be positive")
        return cls(SATURATING, lambda t: a * np.tanh(t / b),
                   lambda t: a / b / np.cosh(t / b) ** 2, {"a": a, "b": b}, 0.0)

    @classmethod
    def from_dict(cls, d: dict) -> "Nonlinearity":
        kind = d.get("kind", POWER)
        if kind == POWER:
            return cls.power(d["p"])
        if kind == "linear":
            return cls.linear()
        if kind == TABLE:
            return cls.table(d["t"], d["g"])
        if kind == SATURATING:
            return cls.saturating(d.get("a", 1.0), d.get("b", 1.0))
        raise NonlinearityError(f"unknown nonlinearity kind {kind!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}

    # checks ---------------------------------------------------------------
    def audit(self, span: float = 1e3, n: int = 2001) -> None:
        """Check ``g(0) = 0`` and monotonicity on ``+-span`` (log-spaced both sides)."""
        pos = np.concatenate([[0.0], np.logspace(-6, np.log10(span), n // 2)])
        t = np.concatenate([-pos[:0:-1], pos])
        v = self(t)
        if not np.all(np.isfinite(v)):
            raise NonlinearityError("nonlinearity is not finite on the audit sample")
        if abs(float(self(0.0))) > 1e-14:
            raise NonlinearityError("nonlinearity must satisfy g(0) = 0")
        if np.any(np.diff(v) < -1e-12 * (1 + np.abs(v[1:]))):
            raise NonlinearityError("nonlinearity must be nondecreasing")

    def lipschitz(self, lo: float, hi: float, samples: int = 513) -> float:
        """Upper bound of ``g'`` on ``[lo, hi]`` (exact for powers ``p >= 1``)."""
        if self.kind == POWER:
            p = self.params["p"]
            if p < 1:
                return np.inf
            return p * max(abs(lo), abs(hi)) ** (p - 1) if p > 1 else 1.0
        if self.kind == SATURATING:
            return self.params["a"] / self.params["b"]
        t = np.linspace(lo, hi, samples)
        return float(np.max(self.derivative(t)))
