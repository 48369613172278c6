"""Chart providers: truncated multivariate polynomials and the JSON chart loader."""
from __future__ import annotations

import json
import os
from typing import Sequence

import numpy as np

from .chart import FermiChart
from .errors import DomainError

MAX_DEGREE = 6


class Polynomial:
    """Sparse polynomial in (x0, x1, ..., xn) given as ``[(coef, exponents), ...]``."""

    def __init__(self, terms: Sequence, nvars: int):
        coefs, exps = [], []
        for term in terms:
            c, e = term
            e = [int(k) for k in e]
            if len(e) != nvars:
                raise DomainError(f"term {term!r} needs {nvars} exponents")
            if any(k < 0 for k in e):
                raise DomainError(f"negative exponent in {term!r}")
            if sum(e) > MAX_DEGREE:
                raise DomainError(f"term {term!r} exceeds total degree {MAX_DEGREE}")
            coefs.append(float(c))
            exps.append(e)
        self.nvars = nvars
        self.coefs = np.asarray(coefs, dtype=float)
        self.exps = np.asarray(exps, dtype=int).reshape(-1, nvars)

    def __call__(self, x0: float, xp) -> float:
        if self.coefs.size == 0:
            return 0.0
        pt = np.concatenate([[x0], np.atleast_1d(xp)])
        return float(np.sum(self.coefs * np.prod(pt[None, :] ** self.exps, axis=1)))

    def diff(self, var: int) -> "Polynomial":
        terms = []
        for c, e in zip(self.coefs, self.exps):
            if e[var] > 0:
                e2 = e.copy()
                e2[var] -= 1
                terms.append((c * e[var], e2))
        return Polynomial(terms, self.nvars)

    def restrict_boundary(self) -> "Polynomial":
        """The polynomial at x0 = 0, still expressed in all variables."""
        terms = [(c, e) for c, e in zip(self.coefs, self.exps) if e[0] == 0]
        return Polynomial(terms, self.nvars)


def make_polynomial_chart(
    dim: int,
    h_terms,
    rho_terms,
    delta: float,
    x_box,
    chart_id: str = "polynomial",
) -> FermiChart:
    """Fermi chart whose tangential metric block and defining function are polynomials.

    ``h_terms[a][b]`` is the term list of h_ab (the block is symmetrized from
    the upper triangle when both entries are given they must agree).
    """
    n = dim - 1
    h = [[None] * n for _ in range(n)]
    for a in range(n):
        for b in range(n):
            src = h_terms[a][b] if h_terms[a][b] is not None else h_terms[b][a]
            h[a][b] = Polynomial(src, dim)
    rho = Polynomial(rho_terms, dim)
    dh = [[[h[a][b].diff(v) for b in range(n)] for a in range(n)] for v in range(dim)]
    drho = [rho.diff(v) for v in range(dim)]
    kap = drho[0].restrict_boundary()
    kgrad = [kap.diff(1 + a) for a in range(n)]
    khess = [[kg.diff(1 + b) for b in range(n)] for kg in kgrad]
    flat = all(dh[0][a][b].coefs.size == 0 or not np.any(dh[0][a][b].coefs) for a in range(n) for b in range(n))

    def mat(polys, x0, xp):
        return np.array([[p(x0, xp) for p in row] for row in polys])

    return FermiChart(
        dim=dim,
        h=lambda x0, xp: mat(h, x0, xp),
        dh0=lambda x0, xp: mat(dh[0], x0, xp),
        dhp=lambda x0, xp: np.array([mat(dh[1 + g], x0, xp) for g in range(n)]),
        rho=lambda x0, xp: rho(x0, xp),
        drho0=lambda x0, xp: drho[0](x0, xp),
        drhop=lambda x0, xp: np.array([drho[1 + a](x0, xp) for a in range(n)]),
        delta=delta,
        x_box=np.asarray(x_box, dtype=float),
        chart_id=chart_id,
        kappa_grad=lambda xp: -np.array([g(0.0, xp) for g in kgrad]),
        kappa_hess=lambda xp: -np.array([[q(0.0, xp) for q in row] for row in khess]),
        flat_normal=flat,
        params={"type": "polynomial"},
    )


def chart_from_dict(spec: dict) -> FermiChart:
    from .examples import EpsilonFamily, make_epsilon_chart, make_warped_ah_chart

    kind = spec.get("type")
    if kind == "epsilon_family":
        fam = EpsilonFamily(
            epsilon=float(spec.get("epsilon", 0.0)),
            delta=float(spec.get("delta", 0.9)),
            x_box=tuple(spec.get("x_box", (-2.0, 2.0))),
            rho_quad=float(spec.get("rho_quad", 0.0)),
        )
        return make_epsilon_chart(fam)
    if kind == "hyperbolic":
        return make_epsilon_chart(EpsilonFamily(epsilon=0.0))
    if kind == "warped_ah":
        return make_warped_ah_chart()
    if kind == "polynomial":
        try:
            dim = int(spec["dim"])
            return make_polynomial_chart(
                dim,
                spec["h"],
                spec["rho"],
                float(spec.get("delta", 0.5)),
                spec.get("x_box", [[-1.0, 1.0]] * (dim - 1)),
                chart_id=spec.get("id", "polynomial"),
            )
        except KeyError as exc:
            raise DomainError(f"polynomial chart is missing field {exc}") from None
    raise DomainError(f"unknown chart type {kind!r}")


def parse_chart(text: str) -> FermiChart:
    """Chart from a short name, an inline JSON document, or a path to one.

    Short names: ``epsilon:<value>``, ``hyperbolic``, ``warped``.
    """
    text = text.strip()
    if text.startswith("epsilon:"):
        try:
            eps = float(text.split(":", 1)[1])
        except ValueError:
            raise DomainError(f"bad epsilon in chart name {text!r}") from None
        return chart_from_dict({"type": "epsilon_family", "epsilon": eps})
    if text in ("hyperbolic", "epsilon"):
        return chart_from_dict({"type": "hyperbolic"})
    if text in ("warped", "warped_ah"):
        return chart_from_dict({"type": "warped_ah"})
    if text.startswith("{"):
        return chart_from_dict(json.loads(text))
    if os.path.exists(text):
        with open(text) as fh:
            return chart_from_dict(json.load(fh))
    raise DomainError(f"unknown chart type {text!r}")
