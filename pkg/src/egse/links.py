"""Strictly increasing link functions ``G: D -> R`` with inverses and derivatives.

A link maps an observation ``y`` living on the open interval ``D`` to the real
line, where the elliptical machinery operates.  Every link exposes the forward
map, its exact inverse, its derivative and the log-derivative (the Jacobian
term of the log-density).

Links are selected from strings in CLI/config files::

    parse_link("logit").forward(0.5)      # 0.0
    parse_link("bs:0.5,2").domain         # (0.0, inf)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special, stats

__all__ = [
    "LinkDomainError",
    "HostCDF",
    "LinkSpec",
    "parse_link",
    "parse_links",
    "eval_link",
    "eval_inverse",
    "eval_deriv",
    "GAUSSIAN_HOST",
    "EXPONENTIAL_HOST",
    "LINK_TOKENS",
]

UNIT = (0.0, 1.0)
POSITIVE = (0.0, math.inf)
REAL = (-math.inf, math.inf)


class LinkDomainError(ValueError):
    """Raised when a value lies outside (or on the boundary of) a link's domain."""


@dataclass(frozen=True)
class HostCDF:
    """Univariate continuous distribution plugged into the CDF-based links.

    ``sf``/``isf`` are carried separately from ``cdf``/``ppf`` so the upper
    tail keeps full relative precision.
    """

    name: str
    support: tuple[float, float]
    cdf: Callable
    sf: Callable
    ppf: Callable
    isf: Callable
    pdf: Callable
    logpdf: Callable

    def __reduce__(self):
        if _HOSTS.get(self.name) is self:
            return (_registered_host, (self.name,))
        return object.__reduce__(self)


GAUSSIAN_HOST = HostCDF(
    "normal", REAL,
    stats.norm.cdf, stats.norm.sf, stats.norm.ppf, stats.norm.isf,
    stats.norm.pdf, stats.norm.logpdf,
)
EXPONENTIAL_HOST = HostCDF(
    "exp", POSITIVE,
    stats.expon.cdf, stats.expon.sf, stats.expon.ppf, stats.expon.isf,
    stats.expon.pdf, stats.expon.logpdf,
)
_HOSTS = {"normal": GAUSSIAN_HOST, "exp": EXPONENTIAL_HOST}


def _registered_host(name: str) -> HostCDF:
    return _HOSTS[name]


def _logit(p):
    return np.log(p) - np.log1p(-p)


def _expit_root(u, k):
    # (e^u / (1 + e^u))^(1/k), computed in log space
    return np.exp(-np.logaddexp(0.0, -u) / k)


def _odd_root(v, p):
    return np.sign(v) * np.abs(v) ** (1.0 / p)


# Each entry: (domain, range, forward, inverse, log_derivative).  Functions take
# (x, params, host).  The range is the image of the domain; it differs from R
# only for the two unit links whose forward map is not onto.
def _tanprobit():
    return (
        UNIT, REAL,
        lambda x, *_: np.tan((x - 0.5) * np.pi),
        lambda u, *_: 0.5 + np.arctan(u) / np.pi,
        lambda x, *_: math.log(math.pi) - 2.0 * np.log(np.sin(np.pi * x)),
    )


def _neglog1m():
    return (
        UNIT, POSITIVE,
        lambda x, *_: -np.log1p(-x),
        lambda u, *_: -np.expm1(-u),
        lambda x, *_: -np.log1p(-x),
    )


def _gumbelunit():
    return (
        UNIT, REAL,
        lambda x, *_: 1.0 - np.log(-np.log(x)),
        lambda u, *_: np.exp(-np.exp(1.0 - u)),
        lambda x, *_: -np.log(x) - np.log(-np.log(x)),
    )


def _loglogc():
    # log(log(1/(1-x)) + 1): onto (0, inf) only when restricted to (0, 1)
    return (
        UNIT, POSITIVE,
        lambda x, *_: np.log1p(-np.log1p(-x)),
        lambda u, *_: -np.expm1(-np.expm1(u)),
        lambda x, *_: -np.log1p(-x) - np.log1p(-np.log1p(-x)),
    )


def _logit_link():
    return (
        UNIT, REAL,
        lambda x, *_: _logit(x),
        lambda u, *_: special.expit(u),
        lambda x, *_: -np.log(x) - np.log1p(-x),
    )


def _cloglog():
    return (
        UNIT, REAL,
        lambda x, *_: np.log(-np.log1p(-x)),
        lambda u, *_: -np.expm1(-np.exp(u)),
        lambda x, *_: -np.log1p(-x) - np.log(-np.log1p(-x)),
    )


def _logit_power(k):
    return (
        UNIT, REAL,
        lambda x, *_: k * np.log(x) - np.log1p(-(x ** k)),
        lambda u, *_: _expit_root(u, k),
        lambda x, *_: math.log(k) - np.log(x) - np.log1p(-(x ** k)),
    )


def _log_link():
    return (
        POSITIVE, REAL,
        lambda x, *_: np.log(x),
        lambda u, *_: np.exp(u),
        lambda x, *_: -np.log(x),
    )


def _xminv():
    def inverse(u, *_):
        r = np.sqrt(u * u + 4.0)
        # for u << 0 the textbook (u + r)/2 cancels; 2/(r - u) is the same number
        return np.where(u >= 0, 0.5 * (u + r), 2.0 / (r - u))

    return (
        POSITIVE, REAL,
        lambda x, *_: x - 1.0 / x,
        inverse,
        lambda x, *_: np.log1p(1.0 / (x * x)),
    )


def _birnbaum_saunders():
    def forward(x, p, _):
        a, b = p
        return (np.sqrt(x / b) - np.sqrt(b / x)) / a

    def inverse(u, p, _):
        a, b = p
        h = 0.5 * a * u
        r = np.sqrt(h * h + 1.0)
        root = np.where(h >= 0, h + r, 1.0 / (r - h))
        return b * root * root

    def log_deriv(x, p, _):
        a, b = p
        return -np.log(2.0 * a * x) + np.log(np.sqrt(x / b) + np.sqrt(b / x))

    return POSITIVE, REAL, forward, inverse, log_deriv


def _cdf_ratio():
    # (2H - 1) / (H (1 - H)) = 1/(1 - H) - 1/H for a host H with positive support
    def forward(x, _, host):
        return 1.0 / host.sf(x) - 1.0 / host.cdf(x)

    def inverse(u, _, host):
        u = np.asarray(u, dtype=float)
        r = np.sqrt(u * u + 4.0)
        with np.errstate(divide="ignore"):
            s = np.where(u >= 0, u + r, 4.0 / (r - u))  # u + r without cancellation
        lower = s / (2.0 + s)
        upper = 2.0 / (2.0 + s)
        return np.where(lower <= 0.5, host.ppf(lower), host.isf(upper))

    def log_deriv(x, _, host):
        h, s = host.cdf(x), host.sf(x)
        return host.logpdf(x) + np.log(1.0 / (s * s) + 1.0 / (h * h))

    return POSITIVE, REAL, forward, inverse, log_deriv


def _poly():
    def forward(x, p, _):
        a, b, k = p
        return a * x ** int(k) + b

    def inverse(u, p, _):
        a, b, k = p
        return _odd_root((u - b) / a, int(k))

    def log_deriv(x, p, _):
        a, _b, k = p
        k = int(k)
        with np.errstate(divide="ignore"):
            return math.log(a * k) + (k - 1) * np.log(np.abs(x))

    return REAL, REAL, forward, inverse, log_deriv


def _sinh():
    return (
        REAL, REAL,
        lambda x, *_: np.sinh(x),
        lambda u, *_: np.arcsinh(u),
        lambda x, *_: np.log(np.cosh(x)),
    )


def _cdf_logit():
    def forward(x, _, host):
        return np.log(host.cdf(x)) - np.log(host.sf(x))

    def inverse(u, _, host):
        u = np.asarray(u, dtype=float)
        return np.where(u <= 0, host.ppf(special.expit(u)), host.isf(special.expit(-u)))

    def log_deriv(x, _, host):
        return host.logpdf(x) - np.log(host.cdf(x)) - np.log(host.sf(x))

    return REAL, REAL, forward, inverse, log_deriv


_FACTORIES = {
    "tanprobit": _tanprobit,
    "neglog1m": _neglog1m,
    "gumbelunit": _gumbelunit,
    "loglogc": _loglogc,
    "logit": _logit_link,
    "cloglog": _cloglog,
    "logitcube": lambda: _logit_power(3),
    "logitquint": lambda: _logit_power(5),
    "log": _log_link,
    "xminv": _xminv,
    "bs": _birnbaum_saunders,
    "cdfratio": _cdf_ratio,
    "poly": _poly,
    "sinh": _sinh,
    "cdflogit": _cdf_logit,
}
LINK_TOKENS = tuple(_FACTORIES)


@dataclass(frozen=True)
class LinkSpec:
    """One link ``G`` together with its shape parameters.

    Parameters
    ----------
    kind : str
        One of :data:`LINK_TOKENS`.
    params : tuple of float
        ``(alpha, beta)`` for ``bs``, ``(a, b, p)`` for ``poly``; empty otherwise.
    host : HostCDF, optional
        Host distribution for ``cdfratio`` (positive support, default
        exponential) and ``cdflogit`` (real support, default Gaussian).
    """

    kind: str
    params: tuple = ()
    host: HostCDF | None = None
    _impl: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in _FACTORIES:
            raise ValueError(f"unknown link {self.kind!r}; expected one of {LINK_TOKENS}")
        params = tuple(float(p) for p in self.params)
        if self.kind == "bs":
            if len(params) != 2 or min(params) <= 0:
                raise ValueError("bs link needs alpha > 0 and beta > 0")
        elif self.kind == "poly":
            if len(params) != 3:
                raise ValueError("poly link needs (a, b, p)")
            a, _, p = params
            if a <= 0 or p != int(p) or int(p) % 2 == 0 or p < 1:
                raise ValueError("poly link needs a > 0 and an odd integer p >= 1")
        elif params:
            raise ValueError(f"link {self.kind!r} takes no parameters")
        object.__setattr__(self, "params", params)
        host = self.host
        if self.kind == "cdfratio":
            host = host or EXPONENTIAL_HOST
            if host.support[0] < 0:
                raise ValueError("cdfratio link needs a host with positive support")
        elif self.kind == "cdflogit":
            host = host or GAUSSIAN_HOST
            if host.support != REAL:
                raise ValueError("cdflogit link needs a host supported on the real line")
        elif host is not None:
            raise ValueError(f"link {self.kind!r} takes no host distribution")
        object.__setattr__(self, "host", host)
        object.__setattr__(self, "_impl", _FACTORIES[self.kind]())

    def __reduce__(self):
        # the implementation tuple holds closures; rebuild it on unpickling
        return (LinkSpec, (self.kind, self.params, self.host))

    # -- metadata ---------------------------------------------------------
    @property
    def domain(self) -> tuple[float, float]:
        return self._impl[0]

    @property
    def image(self) -> tuple[float, float]:
        """Range of the forward map over the domain."""
        return self._impl[1]

    @property
    def token(self) -> str:
        if self.kind in ("bs", "poly"):
            return self.kind + ":" + ",".join(f"{p:g}" for p in self.params)
        if self.kind in ("cdfratio", "cdflogit"):
            return f"{self.kind}:{self.host.name}"
        return self.kind

    def __str__(self):
        return self.token

    # -- evaluation -------------------------------------------------------
    def check_domain(self, x, what: str = "value") -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lo, hi = self.domain
        bad = ~((x > lo) & (x < hi))
        if np.any(bad):
            first = float(x[bad].flat[0]) if x.ndim else float(x)
            raise LinkDomainError(
                f"{what} {first!r} is outside the open domain ({lo:g}, {hi:g}) of link {self.token}"
            )
        return x

    def forward(self, x):
        x = self.check_domain(x)
        return self._impl[2](x, self.params, self.host)

    def inverse(self, u):
        u = np.asarray(u, dtype=float)
        if not np.all(np.isfinite(u)):
            raise LinkDomainError(f"inverse of link {self.token} needs finite arguments")
        lo, hi = self.image
        bad = ~((u > lo) & (u < hi))
        if np.any(bad):
            first = float(u[bad].flat[0]) if u.ndim else float(u)
            raise LinkDomainError(
                f"{first!r} is outside the range ({lo:g}, {hi:g}) of link {self.token}"
            )
        return self._impl[3](u, self.params, self.host)

    def log_deriv(self, x):
        x = self.check_domain(x)
        return self._impl[4](x, self.params, self.host)

    def deriv(self, x):
        return np.exp(self.log_deriv(x))


def parse_link(token: str) -> LinkSpec:
    """Build a :class:`LinkSpec` from its CLI token (``logit``, ``bs:1,2``, ...)."""
    token = token.strip()
    kind, _, rest = token.partition(":")
    kind = kind.lower()
    if kind in ("cdfratio", "cdflogit"):
        if not rest:
            return LinkSpec(kind)
        if rest not in _HOSTS:
            raise ValueError(f"unknown host distribution {rest!r}; expected one of {sorted(_HOSTS)}")
        return LinkSpec(kind, host=_HOSTS[rest])
    params = tuple(float(v) for v in rest.split(",")) if rest else ()
    return LinkSpec(kind, params)


def parse_links(spec: str | Sequence, n: int | None = None) -> list[LinkSpec]:
    """Parse a comma-separated list of link tokens.

    Parameterised tokens carry commas themselves (``poly:1,0,3``), so a
    bare number is folded into the preceding token.  A single token is
    broadcast to ``n`` coordinates when ``n`` is given.
    """
    if not isinstance(spec, str):
        links = [s if isinstance(s, LinkSpec) else parse_link(s) for s in spec]
    else:
        pieces: list[str] = []
        for part in spec.split(","):
            part = part.strip()
            if pieces and _is_number(part):
                pieces[-1] += "," + part
            else:
                pieces.append(part)
        links = [parse_link(p) for p in pieces]
    if n is not None and len(links) == 1 and n > 1:
        links = links * n
    if n is not None and len(links) != n:
        raise ValueError(f"expected {n} links, got {len(links)}")
    return links


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def eval_link(link: LinkSpec, x):
    return link.forward(x)


def eval_inverse(link: LinkSpec, u):
    return link.inverse(u)


def eval_deriv(link: LinkSpec, x):
    return link.deriv(x)
