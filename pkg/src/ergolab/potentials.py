"""Potentials for transfer operators and pressure sums.

A potential is a named, vectorized real function on the circle (or torus).
The registry covers the cases the experiments use:

  zero               phi = 0 (topological pressure / entropy)
  neg_log_branches   phi = -log(branch count), the conformal normalizer
  cosine             phi = amplitude * cos(2 pi x), a smooth non-constant probe
  geometric          phi = -log|det Df|, bound to a map (SRB/Pesin potential)
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .maps import MapModel


def _npts(x: np.ndarray) -> tuple:
    """Output shape for a potential: one value per point."""
    return x.shape[:1] if x.ndim >= 1 else ()


class Potential:
    def __init__(self, name, fn, params=None, sup=None):
        self.name = name
        self.params = dict(params or {})
        self._fn = fn
        self.sup = sup  # optional known upper bound, None if unknown

    def __call__(self, x):
        return self._fn(np.asarray(x, dtype=float))

    def describe(self) -> dict:
        return {"name": self.name, "params": self.params}

    def __repr__(self):
        ps = ", ".join(f"{k}={v}" for k, v in self.params.items())
        return f"<Potential {self.name}({ps})>"


def make_potential(name: str, map_model: MapModel | None = None, **params) -> Potential:
    if name == "zero":
        if params:
            raise ConfigError("zero potential takes no parameters")
        return Potential("zero", lambda x: np.zeros(_npts(x)), sup=0.0)
    if name == "neg_log_branches":
        if params:
            raise ConfigError("neg_log_branches takes no parameters")
        if map_model is None:
            raise ConfigError("neg_log_branches needs the map (for its branch count)")
        c = -float(np.log(map_model.branch_count))
        return Potential("neg_log_branches", lambda x: np.full(_npts(x), c), sup=c)
    if name == "cosine":
        amplitude = float(params.pop("amplitude", 0.1))
        if params:
            raise ConfigError(f"unknown cosine parameters {sorted(params)}")
        if not np.isfinite(amplitude):
            raise ConfigError("cosine amplitude must be finite")

        def fn(x):
            x1 = x[..., 0] if x.ndim == 2 else x
            return amplitude * np.cos(2.0 * np.pi * x1)

        return Potential("cosine", fn, {"amplitude": amplitude}, sup=abs(amplitude))
    if name == "geometric":
        if params:
            raise ConfigError(f"unknown geometric parameters {sorted(params)}")
        if map_model is None:
            raise ConfigError("the geometric potential needs its map")

        def fn(x):
            if map_model.dimension == 2:
                return -np.array([map_model.log_det(tuple(p)) for p in np.atleast_2d(x)])
            return -map_model.log_det_arr(x)

        return Potential("geometric", fn, {"map": map_model.name}, sup=0.0 if map_model.expanding else None)
    raise ConfigError(f"unknown potential {name!r}; known: zero, neg_log_branches, cosine, geometric")
