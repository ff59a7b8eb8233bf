"""Map families on S^1 = [0, 1) (and direct products on T^2).

Families:

  doubling            x -> 2x mod 1. Exact bit shift on the fixed-point window.
  nue_deform(a)       x -> 2x + a*sin(2*pi*x) mod 1, 0 <= a < 1/2. Degree-2
                      deformation of the doubling map; not uniformly expanding
                      once min f' = 2 - 2*pi*a drops below 1.
  intermittent(alpha) T_alpha: x + 2^alpha * x^(1+alpha) on [0, 1/2),
                      x - 2^alpha * (1-x)^(1+alpha) on [1/2, 1]. Neutral fixed
                      point at 0 with one-sided derivative 1.
  manneville          u -> 1 - sqrt(1-2u) on [0, 1/2), sqrt(2u-1) on [1/2, 1):
                      the square-root circle map transported to [0,1) (neutral
                      at 0, derivative singularity at 1/2).
  product             direct product of two 1D families on T^2; log|det| is
                      the sum of the coordinate terms.

Every family is full-branch over the cut at 1/2 with increasing branches, so
inverse branch b maps [0,1) onto [b/2, (b+1)/2). Exact evaluation happens on
the 128-bit window (integer arithmetic where closed forms exist, 200-bit mpfr
otherwise); float paths are separate, vectorized, and used only for grids,
recorded samples, and derivative statistics.
"""

from __future__ import annotations

import hashlib
import math

import gmpy2
import numpy as np
from gmpy2 import mpfr

from .errors import ConfigError, UnsupportedError
from .fixedpoint import FRAC_BITS, HALF, ONE, CirclePoint, HashTail, TorusPoint

LOG2 = math.log(2.0)
_PREC = 200
_EXT = 64  # tail bits read for nonlinear evaluation


def _ctx():
    return gmpy2.context(precision=_PREC)


def _rshift_round(n: int, s: int) -> int:
    return (n + (1 << (s - 1))) >> s


def _isqrt_round(n: int) -> int:
    s = gmpy2.isqrt(n)
    if n - s * s > s:
        s += 1
    return int(s)


def _mpfr_of_window(v: int, bits: int) -> mpfr:
    return gmpy2.div_2exp(mpfr(v), bits)


def _window_of_mpfr(y) -> int:
    return int(gmpy2.rint(gmpy2.mul_2exp(y, FRAC_BITS))) % ONE


class MapModel:
    """Immutable evaluable dynamical system; see module docstring."""

    dimension = 1
    name = ""
    params: dict = {}
    branch_count = 2
    singular_points: tuple = ()
    expanding = False
    max_deriv: float | None = None
    bit_shift = False  # True when eval is an exact window shift (doubling)

    # point-level, exact-window arithmetic
    def eval(self, p: CirclePoint) -> CirclePoint:
        raise NotImplementedError

    def inverse(self, branch: int, p: CirclePoint) -> CirclePoint:
        return CirclePoint(self.inverse_frac(branch, p.frac))

    def inverse_frac(self, branch: int, w: int) -> int:
        raise NotImplementedError

    # float paths (vectorized)
    def eval_float(self, x):
        raise NotImplementedError

    def inverse_float(self, branch: int, y):
        raise NotImplementedError

    def deriv_norm_inv(self, x: float) -> float:
        raise NotImplementedError

    def log_det(self, x: float) -> float:
        raise NotImplementedError

    def log_det_arr(self, x):
        return np.vectorize(self.log_det)(x)

    def deriv_norm_inv_arr(self, x):
        return np.vectorize(self.deriv_norm_inv)(x)

    def branch_index(self, x: float) -> int:
        return 0 if (x % 1.0) < 0.5 else 1

    def branch_index_frac(self, w: int) -> int:
        return 0 if w < HALF else 1

    def _tail_key(self, p: CirclePoint) -> bytes:
        h = hashlib.blake2b(b"ergolab.map", digest_size=16)
        h.update(self._fp)
        h.update(p.fingerprint())
        return h.digest()

    def describe(self) -> dict:
        return {"family": self.name, "params": dict(self.params), "dimension": self.dimension}

    def __repr__(self):
        ps = ", ".join(f"{k}={v}" for k, v in self.params.items())
        return f"<MapModel {self.name}({ps})>"


class _Doubling(MapModel):
    expanding = True
    max_deriv = 2.0
    bit_shift = True

    def __init__(self, name="doubling", params=None):
        self.name = name
        self.params = dict(params or {})
        self._fp = repr((name, sorted(self.params.items()))).encode()

    def eval(self, p):
        return p.double()

    def inverse(self, branch, p):
        return p.halve(branch)

    def inverse_frac(self, branch, w):
        return (w + (branch & 1) * ONE) >> 1

    def eval_float(self, x):
        return (2.0 * np.asarray(x)) % 1.0

    def inverse_float(self, branch, y):
        return (np.asarray(y) + branch) * 0.5

    def deriv_norm_inv(self, x):
        return 0.5

    def log_det(self, x):
        return LOG2

    def log_det_arr(self, x):
        return np.full(np.shape(x), LOG2)

    def deriv_norm_inv_arr(self, x):
        return np.full(np.shape(x), 0.5)


class _NueDeform(MapModel):
    def __init__(self, a: float):
        self.name = "nue_deform"
        self.a = float(a)
        self.params = {"a": self.a}
        self._fp = repr(("nue_deform", self.a)).encode()
        self.max_deriv = 2.0 + 2.0 * math.pi * self.a
        min_deriv = 2.0 - 2.0 * math.pi * self.a
        self.expanding = min_deriv > 1.0
        self._monotone = min_deriv > 0.0
        if self._monotone:
            self.singular_points = ()
        else:
            # f' vanishes at the two solutions of cos(2*pi*x) = -1/(pi*a)
            t = math.acos(-1.0 / (math.pi * self.a)) / (2.0 * math.pi)
            self.singular_points = (t, 1.0 - t)
        with _ctx():
            self._tau = 2 * gmpy2.const_pi()
            self._a_mp = mpfr(self.a)

    def eval(self, p):
        with _ctx():
            x = _mpfr_of_window(p.frac_ext(_EXT), FRAC_BITS + _EXT)
            y = (2 * x + self._a_mp * gmpy2.sin(self._tau * x)) % 1
            w = _window_of_mpfr(y)
        return CirclePoint(w, HashTail(self._tail_key(p)))

    def eval_float(self, x):
        x = np.asarray(x, dtype=float)
        return (2.0 * x + self.a * np.sin(2.0 * np.pi * x)) % 1.0

    def _deriv(self, x):
        return 2.0 + 2.0 * math.pi * self.a * math.cos(2.0 * math.pi * x)

    def deriv_norm_inv(self, x):
        return 1.0 / abs(self._deriv(x))

    def log_det(self, x):
        return math.log(abs(self._deriv(x)))

    def log_det_arr(self, x):
        x = np.asarray(x, dtype=float)
        return np.log(np.abs(2.0 + 2.0 * np.pi * self.a * np.cos(2.0 * np.pi * x)))

    def deriv_norm_inv_arr(self, x):
        x = np.asarray(x, dtype=float)
        return 1.0 / np.abs(2.0 + 2.0 * np.pi * self.a * np.cos(2.0 * np.pi * x))

    def _require_branches(self):
        if not self._monotone:
            raise UnsupportedError(
                f"nue_deform branches need a < 1/pi for monotonicity; a = {self.a}"
            )

    def inverse_float(self, branch, y):
        self._require_branches()
        y = np.asarray(y, dtype=float)
        target = y + branch
        lo = np.full_like(y, branch * 0.5)
        hi = np.full_like(y, (branch + 1) * 0.5)
        x = 0.5 * (lo + hi)
        tau = 2.0 * math.pi
        for _ in range(30):
            g = 2.0 * x + self.a * np.sin(tau * x) - target
            hi = np.where(g > 0.0, x, hi)
            lo = np.where(g > 0.0, lo, x)
            x = 0.5 * (lo + hi)
        for _ in range(3):
            g = 2.0 * x + self.a * np.sin(tau * x) - target
            gp = 2.0 + tau * self.a * np.cos(tau * x)
            x = np.clip(x - g / gp, branch * 0.5, (branch + 1) * 0.5)
        return x

    def inverse_frac(self, branch, w):
        self._require_branches()
        with _ctx():
            y = _mpfr_of_window(w, FRAC_BITS) + branch
            x = mpfr(float(self.inverse_float(branch, float(gmpy2.div_2exp(mpfr(w), FRAC_BITS)))))
            for _ in range(2):
                g = 2 * x + self._a_mp * gmpy2.sin(self._tau * x) - y
                gp = 2 + self._tau * self._a_mp * gmpy2.cos(self._tau * x)
                x = x - g / gp
            # branch image is [b/2, (b+1)/2]; keep endpoint 1 unwrapped
            return min(max(int(gmpy2.rint(gmpy2.mul_2exp(x, FRAC_BITS))), 0), ONE)


class _Intermittent(MapModel):
    def __init__(self, alpha: float):
        self.name = "intermittent"
        self.alpha = float(alpha)
        self.params = {"alpha": self.alpha}
        self._fp = repr(("intermittent", self.alpha)).encode()
        self.max_deriv = 2.0 + self.alpha
        self.expanding = False
        a = self.alpha
        self._int_alpha = a.is_integer() and 1 <= a <= 8
        self._c = 2.0**a  # 2^alpha
        with _ctx():
            self._c_mp = mpfr(2) ** mpfr(a)
            self._alpha_mp = mpfr(a)

    # branch 0 kernel g(x) = x + 2^alpha x^(1+alpha), exact on the window
    def _g0_window(self, v: int) -> int:
        if v == 0:
            return 0
        if self._int_alpha:
            k = int(self.alpha)
            return v + _rshift_round((v ** (1 + k)) << k, k * FRAC_BITS)
        with _ctx():
            x = _mpfr_of_window(v, FRAC_BITS)
            y = x + self._c_mp * x ** (1 + self._alpha_mp)
            return int(gmpy2.rint(gmpy2.mul_2exp(y, FRAC_BITS)))

    def eval(self, p):
        v = p.frac
        if v < HALF:
            w = self._g0_window(v) % ONE
        else:
            w = (v - (self._g0_window(ONE - v) - (ONE - v))) % ONE
        return CirclePoint(w)

    def eval_float(self, x):
        x = np.asarray(x, dtype=float)
        lo = x + self._c * x ** (1.0 + self.alpha)
        w = 1.0 - x
        hi = x - self._c * w ** (1.0 + self.alpha)
        return np.where(x < 0.5, lo, hi) % 1.0

    def _deriv(self, x):
        s = x if x < 0.5 else 1.0 - x
        return 1.0 + self._c * (1.0 + self.alpha) * s**self.alpha

    def deriv_norm_inv(self, x):
        return 1.0 / self._deriv(x)

    def log_det(self, x):
        return math.log(self._deriv(x))

    def log_det_arr(self, x):
        x = np.asarray(x, dtype=float)
        s = np.where(x < 0.5, x, 1.0 - x)
        return np.log1p(self._c * (1.0 + self.alpha) * s**self.alpha)

    def deriv_norm_inv_arr(self, x):
        x = np.asarray(x, dtype=float)
        s = np.where(x < 0.5, x, 1.0 - x)
        return 1.0 / (1.0 + self._c * (1.0 + self.alpha) * s**self.alpha)

    def inverse_float(self, branch, y):
        y = np.asarray(y, dtype=float)
        target = y if branch == 0 else 1.0 - y
        lo = np.zeros_like(target)
        hi = np.full_like(target, 0.5)
        x = 0.5 * (lo + hi)
        for _ in range(30):
            g = x + self._c * x ** (1.0 + self.alpha) - target
            hi = np.where(g > 0.0, x, hi)
            lo = np.where(g > 0.0, lo, x)
            x = 0.5 * (lo + hi)
        for _ in range(3):
            g = x + self._c * x ** (1.0 + self.alpha) - target
            gp = 1.0 + self._c * (1.0 + self.alpha) * x**self.alpha
            x = np.clip(x - g / gp, 0.0, 0.5)
        return x if branch == 0 else 1.0 - x

    def inverse_frac(self, branch, w):
        # branch 1 reduces to branch 0 via x = 1 - g0^{-1}(1 - y)
        t = w if branch == 0 else ONE - w
        if t <= 0:
            v = 0
        else:
            with _ctx():
                y = _mpfr_of_window(t, FRAC_BITS)
                x = mpfr(float(self.inverse_float(0, float(y))))
                if x <= 0:
                    x = y  # Newton seed for tiny targets
                for _ in range(3):
                    g = x + self._c_mp * x ** (1 + self._alpha_mp) - y
                    gp = 1 + self._c_mp * (1 + self._alpha_mp) * x**self._alpha_mp
                    x = x - g / gp
                v = min(max(int(gmpy2.rint(gmpy2.mul_2exp(x, FRAC_BITS))), 0), HALF)
        return v if branch == 0 else ONE - v


class _Manneville(MapModel):
    singular_points = (0.5,)
    expanding = False
    max_deriv = None  # derivative unbounded near the cut

    def __init__(self):
        self.name = "manneville"
        self.params = {}
        self._fp = b"('manneville',)"

    def eval(self, p):
        v = p.frac
        if v < HALF:
            w = (ONE - _isqrt_round((ONE - 2 * v) << FRAC_BITS)) % ONE
        else:
            w = _isqrt_round((2 * v - ONE) << FRAC_BITS) % ONE
        return CirclePoint(w)

    def eval_float(self, x):
        x = np.asarray(x, dtype=float)
        lo = 1.0 - np.sqrt(np.maximum(1.0 - 2.0 * x, 0.0))
        hi = np.sqrt(np.maximum(2.0 * x - 1.0, 0.0))
        return np.where(x < 0.5, lo, hi) % 1.0

    def _s(self, x):
        return 1.0 - 2.0 * x if x < 0.5 else 2.0 * x - 1.0

    def deriv_norm_inv(self, x):
        return math.sqrt(self._s(x))

    def log_det(self, x):
        s = self._s(x)
        if s == 0.0:
            return math.inf
        return -0.5 * math.log(s)

    def log_det_arr(self, x):
        x = np.asarray(x, dtype=float)
        s = np.abs(1.0 - 2.0 * x)
        with np.errstate(divide="ignore"):
            return -0.5 * np.log(s)

    def deriv_norm_inv_arr(self, x):
        x = np.asarray(x, dtype=float)
        return np.sqrt(np.abs(1.0 - 2.0 * x))

    def inverse_float(self, branch, y):
        y = np.asarray(y, dtype=float)
        if branch == 0:
            return 0.5 * (1.0 - (1.0 - y) ** 2)
        return 0.5 * (1.0 + y * y)

    def inverse_frac(self, branch, w):
        if branch == 0:
            num = ONE * ONE - (ONE - w) ** 2
        else:
            num = ONE * ONE + w * w
        return _rshift_round(num, FRAC_BITS + 1) % ONE


class _Product(MapModel):
    dimension = 2

    def __init__(self, mx: MapModel, my: MapModel):
        if mx.dimension != 1 or my.dimension != 1:
            raise ConfigError("product components must be 1D families")
        self.name = "product"
        self.components = (mx, my)
        self.params = {"x": mx.describe(), "y": my.describe()}
        self.branch_count = mx.branch_count * my.branch_count
        self.expanding = mx.expanding and my.expanding
        self.singular_points = tuple((s, None) for s in mx.singular_points) + tuple(
            (None, s) for s in my.singular_points
        )
        if mx.max_deriv is not None and my.max_deriv is not None:
            self.max_deriv = max(mx.max_deriv, my.max_deriv)

    def eval(self, p: TorusPoint):
        mx, my = self.components
        return TorusPoint(mx.eval(p.x), my.eval(p.y))

    def eval_float(self, x):
        x = np.asarray(x, dtype=float)
        mx, my = self.components
        return np.stack([mx.eval_float(x[..., 0]), my.eval_float(x[..., 1])], axis=-1)

    def deriv_norm_inv(self, xy):
        mx, my = self.components
        return max(mx.deriv_norm_inv(xy[0]), my.deriv_norm_inv(xy[1]))

    def log_det(self, xy):
        mx, my = self.components
        return mx.log_det(xy[0]) + my.log_det(xy[1])

    def branch_index(self, xy):
        mx, my = self.components
        return mx.branch_index(xy[0]) * my.branch_count + my.branch_index(xy[1])

    def inverse(self, branch, p: TorusPoint):
        mx, my = self.components
        bx, by = divmod(branch, my.branch_count)
        return TorusPoint(mx.inverse(bx, p.x), my.inverse(by, p.y))


_FAMILIES = ("doubling", "nue_deform", "intermittent", "manneville", "product")


def make_map(name: str, **params) -> MapModel:
    """Build a MapModel by family name; validates parameter ranges."""
    if name == "doubling":
        if params:
            raise ConfigError("doubling takes no parameters")
        return _Doubling()
    if name == "nue_deform":
        a = float(params.pop("a", 0.0))
        if params:
            raise ConfigError(f"unknown nue_deform parameters {sorted(params)}")
        if not 0.0 <= a < 0.5:
            raise ConfigError(f"nue_deform needs 0 <= a < 1/2, got a = {a}")
        if a == 0.0:
            return _Doubling(name="nue_deform", params={"a": 0.0})
        return _NueDeform(a)
    if name == "intermittent":
        alpha = float(params.pop("alpha", 1.0))
        if params:
            raise ConfigError(f"unknown intermittent parameters {sorted(params)}")
        if not alpha > 0.0:
            raise ConfigError(f"intermittent needs alpha > 0, got {alpha}")
        return _Intermittent(alpha)
    if name == "manneville":
        if params:
            raise ConfigError("manneville takes no parameters")
        return _Manneville()
    if name == "product":
        try:
            fx, fy = params.pop("x"), params.pop("y")
        except KeyError:
            raise ConfigError("product needs component specs 'x' and 'y'") from None
        if params:
            raise ConfigError(f"unknown product parameters {sorted(params)}")
        return _Product(_from_spec(fx), _from_spec(fy))
    raise ConfigError(f"unknown map family {name!r}; known: {', '.join(_FAMILIES)}")


def _from_spec(spec) -> MapModel:
    if isinstance(spec, MapModel):
        return spec
    if isinstance(spec, str):
        return make_map(spec)
    spec = dict(spec)
    return make_map(spec.pop("family"), **spec)
