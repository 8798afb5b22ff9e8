"""Scalar convex-analysis kernel for maximal monotone graphs on [-1, 1].

Each potential is a convex, lower semicontinuous function j >= 0 with
j(0) = 0 whose subdifferential beta = dj is a maximal monotone graph with
closed domain [-1, 1] (the smooth double-well is the unconstrained control
case).  The module computes, for a parameter eps in (0, 1]:

  resolvent   x = (I + eps*beta)^{-1}(r), the unique root of x + eps*beta(x) = r
  yosida      beta_eps(r) = (r - x)/eps, monotone and (1/eps)-Lipschitz
  moreau      j_eps(r) = j(x) + (r - x)^2/(2 eps), smooth, increases to j

The logarithmic resolvent is solved in the variable t with x = tanh(t),
which turns the root equation into  tanh(t) + 2*eps*t = r.  This form has
no boundary singularity, so saturated inputs (where x is within one ulp of
+-1 but beta_eps(r) is huge) are still resolved to full residual accuracy.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

LOG2 = math.log(2.0)

# Floor for log arguments near the domain boundary; keeps beta finite at +-1.
_LOG_FLOOR = 1e-300


class PotentialKind(enum.Enum):
    """Which convex part j is used."""

    LOGARITHMIC = "logarithmic"
    OBSTACLE = "obstacle"
    DOUBLE_WELL = "doublewell"


@dataclass(frozen=True)
class PotentialSpec:
    """A maximal monotone graph beta = dj on R plus the concave shift.

    lam is the coefficient of the concave quadratic -(lam/2) u^2 split off
    from the full free energy; it never enters the convex kernel itself.
    coeff scales the double-well convex part j(u) = coeff * u^4 and is
    ignored by the singular kinds (coeff = 0 gives the linear control case).
    """

    kind: PotentialKind
    lam: float = 0.0
    coeff: float = 1.0
    domain: tuple[float, float] = field(default=(-1.0, 1.0), init=False)

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam >= 0.0):
            raise ValueError(f"lam must be finite and >= 0, got {self.lam}")
        if not (math.isfinite(self.coeff) and self.coeff >= 0.0):
            raise ValueError(f"coeff must be finite and >= 0, got {self.coeff}")


@dataclass(frozen=True)
class YosidaEval:
    """Resolvent point and regularized values at a single scalar input."""

    r: float
    eps: float
    resolvent: float
    yosida: float
    moreau: float
    residual: float


def j_value(spec: PotentialSpec, r):
    """Convex part j(r); +inf outside [-1, 1] for the singular kinds."""
    r = np.asarray(r, dtype=float)
    if spec.kind is PotentialKind.DOUBLE_WELL:
        return spec.coeff * r**4
    inside = np.abs(r) <= 1.0
    if spec.kind is PotentialKind.OBSTACLE:
        return np.where(inside, 0.0, np.inf)
    # (1-r)log(1-r) + (1+r)log(1+r), with the 0*log(0) limits at the corners
    lo = np.where(
        1.0 - r > 0.0, (1.0 - r) * np.log(np.maximum(1.0 - r, _LOG_FLOOR)), 0.0
    )
    hi = np.where(
        1.0 + r > 0.0, (1.0 + r) * np.log(np.maximum(1.0 + r, _LOG_FLOOR)), 0.0
    )
    return np.where(inside, lo + hi, np.inf)


def beta_value(spec: PotentialSpec, r):
    """Single-valued branch of beta.

    Logarithmic: log((1+r)/(1-r)) with the log argument floored at 1e-300,
    so boundary inputs give large finite values instead of overflow.
    Obstacle: 0 on [-1, 1]; nan outside (the graph has no value there).
    """
    r = np.asarray(r, dtype=float)
    if spec.kind is PotentialKind.DOUBLE_WELL:
        return 4.0 * spec.coeff * r**3
    if spec.kind is PotentialKind.OBSTACLE:
        return np.where(np.abs(r) <= 1.0, 0.0, np.nan)
    return np.log(np.maximum(1.0 + r, _LOG_FLOOR)) - np.log(
        np.maximum(1.0 - r, _LOG_FLOOR)
    )


def _check_eps(eps: float) -> float:
    if not (isinstance(eps, (int, float)) and math.isfinite(eps)) or not (
        0.0 < eps <= 1.0
    ):
        raise ValueError(f"eps must lie in (0, 1], got {eps!r}")
    return float(eps)


def _solve_log_t(ra: np.ndarray, eps: float) -> np.ndarray:
    """Root of tanh(t) + 2*eps*t = ra for ra >= 0, elementwise.

    The map is strictly increasing and concave on t >= 0, so a bracketing
    Newton iteration with bisection fallback converges for every input.
    Residual target is 1e-13 * (1 + ra), well under the 1e-12 contract.
    """
    lo = np.zeros_like(ra)
    hi = ra / (2.0 * eps) + 1e-12
    t = np.minimum(ra, hi)  # resolvent obeys |x| <= |r|, so t <= atanh-ish start
    tol = 1e-13 * (1.0 + ra)
    for _ in range(80):
        th = np.tanh(t)
        phi = th + 2.0 * eps * t - ra
        done = np.abs(phi) <= tol
        if done.all():
            break
        # keep the bracket consistent with the sign of phi
        lo = np.where(phi < 0.0, t, lo)
        hi = np.where(phi > 0.0, t, hi)
        dphi = (1.0 - th * th) + 2.0 * eps
        t_new = t - phi / dphi
        outside = (t_new <= lo) | (t_new >= hi)
        t_new = np.where(outside, 0.5 * (lo + hi), t_new)
        t = np.where(done, t, t_new)
    return t


def _log_j_from_t(t: np.ndarray) -> np.ndarray:
    """j(tanh(t)) for t >= 0, evaluated without forming 1 - x explicitly."""
    em = np.exp(-2.0 * t)
    l1p = np.log1p(em)
    s = 2.0 * em / (1.0 + em)  # 1 - x
    p = 2.0 / (1.0 + em)  # 1 + x
    log_s = LOG2 - 2.0 * t - l1p
    log_p = LOG2 - l1p
    return np.where(s > 0.0, s * log_s, 0.0) + p * log_p


def _solve_quartic(ra: np.ndarray, eps: float, coeff: float) -> np.ndarray:
    """Root of x + 4*eps*coeff*x^3 = ra for ra >= 0, elementwise."""
    if coeff == 0.0:
        return ra.copy()
    a = 4.0 * eps * coeff
    x = ra.copy()  # psi(ra) >= 0 and psi is convex: Newton descends to the root
    tol = 1e-13 * (1.0 + ra)
    for _ in range(80):
        psi = x + a * x**3 - ra
        if (np.abs(psi) <= tol).all():
            break
        x = x - psi / (1.0 + 3.0 * a * x * x)
        x = np.clip(x, 0.0, None)
    return x


def _resolve_arrays(spec: PotentialSpec, r: np.ndarray, eps: float):
    """Vectorized core: (resolvent, yosida, moreau, residual) arrays.

    Solves at |r| and restores the sign afterwards, so the returned maps
    are exactly odd/even as the underlying graph demands.
    """
    sign = np.sign(r)
    ra = np.abs(r)
    if spec.kind is PotentialKind.OBSTACLE:
        x = np.minimum(ra, 1.0)
        y = (ra - x) / eps
        moreau = 0.5 * (ra - x) ** 2 / eps
        residual = np.zeros_like(ra)
    elif spec.kind is PotentialKind.LOGARITHMIC:
        t = _solve_log_t(ra, eps)
        x = np.tanh(t)
        y = 2.0 * t
        moreau = _log_j_from_t(t) + 2.0 * eps * t * t
        residual = np.abs(x + 2.0 * eps * t - ra)
    else:
        x = _solve_quartic(ra, eps, spec.coeff)
        y = 4.0 * spec.coeff * x**3
        moreau = spec.coeff * x**4 + 8.0 * eps * spec.coeff**2 * x**6
        residual = np.abs(x + eps * y - ra)
    return sign * x, sign * y, moreau, residual


def resolvent(spec: PotentialSpec, r: float, eps: float) -> YosidaEval:
    """Evaluate resolvent, Yosida approximation and Moreau envelope at r."""
    eps = _check_eps(eps)
    if not (isinstance(r, (int, float)) and math.isfinite(r)):
        raise ValueError(f"r must be a finite real, got {r!r}")
    ra = np.asarray([float(r)])
    x, y, m, res = _resolve_arrays(spec, ra, eps)
    return YosidaEval(
        r=float(r),
        eps=eps,
        resolvent=float(x[0]),
        yosida=float(y[0]),
        moreau=float(m[0]),
        residual=float(res[0]),
    )


def yosida_curve(spec: PotentialSpec, eps: float, grid) -> list[YosidaEval]:
    """Evaluate the Yosida family on a sorted grid of inputs."""
    eps = _check_eps(eps)
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1:
        raise ValueError("grid must be one-dimensional")
    if not np.isfinite(g).all():
        raise ValueError("grid contains non-finite entries")
    if np.any(np.diff(g) < 0.0):
        raise ValueError("grid must be sorted in nondecreasing order")
    x, y, m, res = _resolve_arrays(spec, g, eps)
    return [
        YosidaEval(float(g[i]), eps, float(x[i]), float(y[i]), float(m[i]), float(res[i]))
        for i in range(g.size)
    ]


def yosida_apply(spec: PotentialSpec, eps: float, values: np.ndarray):
    """(beta_eps(values), beta_eps'(values)) for array input.

    The derivative is the a.e. derivative beta'(x)/(1 + eps*beta'(x)) with
    the obstacle corner tie resolved to 0; it is what a semismooth Newton
    linearization of the regularized graph needs.
    """
    eps = _check_eps(eps)
    v = np.asarray(values, dtype=float)
    sign = np.sign(v)
    ra = np.abs(v)
    if spec.kind is PotentialKind.OBSTACLE:
        y = sign * np.maximum(ra - 1.0, 0.0) / eps
        dy = np.where(ra > 1.0, 1.0 / eps, 0.0)
        return y, dy
    if spec.kind is PotentialKind.LOGARITHMIC:
        t = _solve_log_t(ra, eps)
        em = np.exp(-2.0 * t)
        sech2 = 4.0 * em / (1.0 + em) ** 2  # 1 - tanh(t)^2, no overflow
        y = sign * 2.0 * t
        dy = 1.0 / (0.5 * sech2 + eps)
        return y, dy
    x = _solve_quartic(ra, eps, spec.coeff)
    bp = 12.0 * spec.coeff * x * x
    return sign * 4.0 * spec.coeff * x**3, bp / (1.0 + eps * bp)


def moreau_apply(spec: PotentialSpec, eps: float, values: np.ndarray) -> np.ndarray:
    """Moreau envelope j_eps at array input (finite everywhere)."""
    eps = _check_eps(eps)
    v = np.asarray(values, dtype=float)
    _, _, m, _ = _resolve_arrays(spec, v, eps)
    return m


class NonlinearTerm:
    """Pointwise nonlinearity the time integrator applies in collocation.

    For the singular kinds this is the Yosida regularization at the given
    eps.  The smooth double-well is the Lipschitz control case and bypasses
    the regularization entirely: value/derivative/density are the bare
    graph beta, beta' and j, so its dynamics do not depend on eps.
    """

    def __init__(self, spec: PotentialSpec, eps: float):
        self.spec = spec
        self.eps = _check_eps(eps)
        self._bypass = spec.kind is PotentialKind.DOUBLE_WELL

    def value_and_derivative(self, values: np.ndarray):
        if self._bypass:
            c = self.spec.coeff
            return 4.0 * c * values**3, 12.0 * c * values * values
        return yosida_apply(self.spec, self.eps, values)

    def value(self, values: np.ndarray) -> np.ndarray:
        return self.value_and_derivative(values)[0]

    def density(self, values: np.ndarray) -> np.ndarray:
        """Energy density (j for the control case, j_eps otherwise)."""
        if self._bypass:
            return self.spec.coeff * values**4
        return moreau_apply(self.spec, self.eps, values)


@dataclass(frozen=True)
class L1BoundResult:
    """Certificate for the lower bound beta_eps(r) r >= c1 |beta_eps(r)| - c2."""

    c1: float
    c2: float
    ok: bool
    per_eps_c2: tuple[float, ...]
    offender: tuple[float, float] | None = None  # (r, eps) of the worst penalty


def verify_l1_bound(
    spec: PotentialSpec,
    eps_list,
    r_range=(-5.0, 5.0),
    samples: int = 2000,
) -> L1BoundResult:
    """Search for an eps-uniform constant c2 with c1 fixed at 1/2.

    For each eps the smallest admissible c2 is the max over the sample grid
    of (c1 |beta_eps(r)| - beta_eps(r) r)_+.  The returned c2 is the max
    across the ladder.  ok is true when the per-eps sequence has stopped
    moving at the two finest rungs (within 1% of max(1, c2)); a c2 that
    keeps growing as eps shrinks means no eps-independent constant exists
    on the sampled range and the worst (r, eps) is reported.
    """
    eps_arr = [float(e) for e in eps_list]
    if not eps_arr:
        raise ValueError("eps_list must be nonempty")
    for e in eps_arr:
        if not (0.0 < e < 1.0):
            raise ValueError(f"every eps must lie in (0, 1), got {e}")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    lo, hi = float(r_range[0]), float(r_range[1])
    r = np.linspace(lo, hi, samples) if samples > 1 else np.asarray([lo])

    c1 = 0.5
    per_eps = []
    worst = (0.0, eps_arr[0])
    worst_pen = -np.inf
    for e in sorted(eps_arr, reverse=True):
        y, _ = yosida_apply(spec, e, r)
        penalty = c1 * np.abs(y) - y * r
        i = int(np.argmax(penalty))
        if penalty[i] > worst_pen:
            worst_pen = float(penalty[i])
            worst = (float(r[i]), e)
        per_eps.append(max(0.0, float(penalty[i])))
    c2 = max(per_eps)
    if len(per_eps) == 1:
        ok = True
    else:
        drift = abs(per_eps[-1] - per_eps[-2])  # two finest rungs
        ok = drift <= 0.01 * max(1.0, c2)
    return L1BoundResult(
        c1=c1,
        c2=c2,
        ok=ok,
        per_eps_c2=tuple(per_eps),
        offender=None if ok else worst,
    )
