"""The alpha-logarithm / alpha-exponential family and the losses built on it.

``alpha = 0`` gives the (soft) 0-1 loss, ``alpha = 1`` the cross-entropy, and
``alpha > 1`` power losses that blow up at zero like the cross-entropy does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# alpha within this distance of 1 is routed to the natural log / exp
ALPHA_ONE_TOL = 1e-9


def is_ce(alpha: float) -> bool:
    return abs(alpha - 1.0) <= ALPHA_ONE_TOL


def _check_alpha(alpha: float) -> None:
    if not alpha >= 0 or not math.isfinite(alpha):
        raise ValueError(f"alpha must be a finite number >= 0, got {alpha!r}")


@dataclass(frozen=True)
class LossSpec:
    """Loss family selector.

    ``kind`` is one of ``"alpha_log"``, ``"cross_entropy"`` or ``"quadratic"``.
    An ``alpha_log`` with alpha numerically equal to 1 is normalized to
    ``cross_entropy``.
    """

    kind: str
    alpha: float | None = None

    def __post_init__(self):
        if self.kind == "alpha_log":
            if self.alpha is None:
                raise ValueError("alpha_log loss requires alpha")
            _check_alpha(self.alpha)
            if is_ce(self.alpha):
                object.__setattr__(self, "kind", "cross_entropy")
                object.__setattr__(self, "alpha", 1.0)
        elif self.kind == "cross_entropy":
            object.__setattr__(self, "alpha", 1.0)
        elif self.kind == "quadratic":
            object.__setattr__(self, "alpha", None)
        else:
            raise ValueError(f"unknown loss kind {self.kind!r}")

    @classmethod
    def alpha_log(cls, alpha: float) -> "LossSpec":
        return cls("alpha_log", float(alpha))

    @classmethod
    def cross_entropy(cls) -> "LossSpec":
        return cls("cross_entropy")

    @classmethod
    def quadratic(cls) -> "LossSpec":
        return cls("quadratic")

    @classmethod
    def parse(cls, text: str) -> "LossSpec":
        """Parse ``ce``, ``zero_one``, ``quadratic`` or ``alpha:<value>``."""
        t = text.strip().lower()
        if t in ("ce", "cross_entropy", "cross-entropy"):
            return cls.cross_entropy()
        if t in ("zero_one", "0-1", "01"):
            return cls.alpha_log(0.0)
        if t in ("quadratic", "quad"):
            return cls.quadratic()
        if t.startswith("alpha:"):
            return cls.alpha_log(float(t.split(":", 1)[1]))
        raise ValueError(f"cannot parse loss {text!r}")

    def __str__(self):
        if self.kind == "alpha_log":
            return f"alpha:{self.alpha:g}"
        return "ce" if self.kind == "cross_entropy" else "quadratic"


def log_alpha(alpha: float, t):
    """``(t**(1-alpha) - 1) / (1 - alpha)``, or ``log(t)`` when alpha is 1.

    ``t = 0`` returns ``-1/(1-alpha)`` for ``alpha < 1`` and ``-inf`` otherwise.
    Works elementwise on arrays.
    """
    _check_alpha(alpha)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(np.isnan(t_arr)):
        raise ValueError("log_alpha is undefined for negative arguments")
    with np.errstate(divide="ignore"):
        if is_ce(alpha):
            out = np.log(t_arr)
        elif alpha < 1:
            out = np.expm1((1.0 - alpha) * np.log(t_arr)) / (1.0 - alpha)
            out = np.where(t_arr == 0, -1.0 / (1.0 - alpha), out)
        else:
            out = np.expm1((1.0 - alpha) * np.log(t_arr)) / (1.0 - alpha)
            out = np.where(t_arr == 0, -np.inf, out)
    return float(out) if out.ndim == 0 else out


def exp_alpha(alpha: float, s):
    """Inverse of :func:`log_alpha`: ``((1-alpha)*s + 1)**(1/(1-alpha))``.

    Domain: ``s >= -1/(1-alpha)`` for ``alpha < 1``, ``s < 1/(alpha-1)`` for
    ``alpha > 1``, everything for ``alpha = 1``.
    """
    _check_alpha(alpha)
    s_arr = np.asarray(s, dtype=float)
    if is_ce(alpha):
        out = np.exp(s_arr)
    else:
        base = (1.0 - alpha) * s_arr + 1.0
        if alpha < 1:
            # tolerate rounding right at the lower edge of the domain
            lo = -1.0 / (1.0 - alpha)
            if np.any(s_arr < lo - 1e-12 * max(1.0, abs(lo))):
                raise ValueError(f"exp_alpha: argument below domain edge {lo}")
            base = np.maximum(base, 0.0)
        elif np.any(base <= 0):
            raise ValueError(f"exp_alpha: argument must be < {1.0 / (alpha - 1.0)}")
        with np.errstate(divide="ignore"):
            out = np.exp(np.log(base) / (1.0 - alpha))
    return float(out) if out.ndim == 0 else out


def loss_value(spec: LossSpec, v, i: int) -> float:
    """Loss of predicting the probability vector ``v`` when the label is ``i``."""
    v = np.asarray(v, dtype=float)
    if np.any(v < -1e-9) or abs(v.sum() - 1.0) > 1e-9:
        raise ValueError("v must lie in the probability simplex")
    if spec.kind == "quadratic":
        e = np.zeros_like(v)
        e[i] = 1.0
        return float(np.sum((v - e) ** 2))
    vi = max(float(v[i]), 0.0)
    if spec.kind == "cross_entropy":
        return math.inf if vi == 0 else -math.log(vi)
    return -log_alpha(spec.alpha, vi)


def _g_sum(alpha: float, a: np.ndarray, z: float) -> float:
    s = -a - z
    if is_ce(alpha):
        return float(np.exp(s).sum())
    if alpha < 1:
        return float(exp_alpha(alpha, np.maximum(s, -1.0 / (1.0 - alpha))).sum())
    return float(exp_alpha(alpha, s).sum())


def find_normalizer(alpha: float, a) -> float:
    """Return the ``Z`` making ``sum_i exp_alpha(-a_i - Z)`` (clamped for alpha<1) equal 1.

    Entries of ``a`` equal to ``+inf`` contribute nothing. The left-hand side is
    strictly decreasing in ``Z`` so the root is bracketed and bisected.
    """
    _check_alpha(alpha)
    a = np.asarray(a, dtype=float)
    finite = a[np.isfinite(a)]
    if np.any(np.isneginf(a)) or np.any(np.isnan(a)):
        raise ValueError("normalizer inputs must be real or +inf")
    if finite.size == 0:
        raise ValueError("find_normalizer needs at least one finite entry")
    if is_ce(alpha):
        m = finite.min()
        return float(-m + math.log(np.exp(-(finite - m)).sum()))

    lo = -finite.max() - 10.0
    hi = -finite.min() + 10.0
    if alpha > 1:
        # sum blows up as Z approaches this edge from above
        edge = 1.0 / (1.0 - alpha) - finite.min()
        lo = edge + 1e-12 * max(1.0, abs(edge))
        while _g_sum(alpha, finite, lo) < 1.0:
            closer = edge + (lo - edge) * 1e-3
            if closer <= edge:
                break
            lo = closer
    else:
        step = 10.0
        while _g_sum(alpha, finite, lo) < 1.0:
            lo -= step
            step *= 2.0
    step = 10.0
    while _g_sum(alpha, finite, hi) > 1.0:
        hi += step
        step *= 2.0

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _g_sum(alpha, finite, mid) > 1.0:
            lo = mid
        else:
            hi = mid
    # pick the endpoint with the smaller residual
    r_lo = abs(_g_sum(alpha, finite, lo) - 1.0)
    r_hi = abs(_g_sum(alpha, finite, hi) - 1.0)
    return float(lo if r_lo <= r_hi else hi)
