import math
import os

import numpy as np
import pytest

from ccgeo.errors import DomainError
from ccgeo.examples import (
    EpsilonFamily,
    asymptote,
    direction_from_theta,
    figure_data,
    hyperbolic_endpoint_oracle,
    make_epsilon_chart,
    make_hyperbolic_chart,
)


def test_chart_ids():
    assert make_epsilon_chart(EpsilonFamily(0.5)).chart_id == "epsilon_0.5"
    assert make_epsilon_chart(EpsilonFamily(1.0, rho_quad=1.0)).chart_id == "epsilon_1_q1"
    assert make_hyperbolic_chart().chart_id == "epsilon_0"


def test_oracle_domain():
    assert hyperbolic_endpoint_oracle((0.0, 1.0), math.pi / 4) == pytest.approx(math.tan(math.pi / 8))
    with pytest.raises(DomainError):
        hyperbolic_endpoint_oracle((0.0, -1.0), 0.1)
    with pytest.raises(DomainError):
        hyperbolic_endpoint_oracle((0.0, 1.0), 2.0)
    assert direction_from_theta(0.0) == pytest.approx([1.0, 0.0])


def test_asymptote():
    y = np.array([0.0, 0.1])
    assert asymptote(y, 0.5, 1.0) == pytest.approx([0.0, -0.005 * math.log(0.1) + 0.005])


def _read(path):
    meta, rows = {}, []
    with open(path) as fh:
        for ln in fh:
            if ln.startswith("# "):
                k, v = ln[2:].rstrip("\n").split(": ", 1)
                meta[k] = v
            elif ln.startswith("y,x"):
                continue
            else:
                rows.append([float(v) for v in ln.split(",")])
    return meta, np.array(rows)


def test_figure1_files_and_rerun(tmp_path):
    a = figure_data(1, [0.0, 1.0], str(tmp_path / "a"))
    b = figure_data(1, [0.0, 1.0], str(tmp_path / "b"))
    assert len(a) == 10
    names = sorted(os.path.basename(p) for p in a)
    assert "fig1_epsp0_0000_thetap0_7854.csv" in names
    for pa, pb in zip(a, b):
        assert open(pa, "rb").read() == open(pb, "rb").read()
    meta, data = _read(a[0])
    assert meta["figure"] == "1" and "code_version" in meta and "rel_tol" in meta
    assert data[0] == pytest.approx([1.0, 0.0])
    assert data[-1, 0] == 0.0
    for p in a:
        meta, _ = _read(p)
        if meta["epsilon"] == "0.0":
            th = float(meta["theta"])
            assert float(meta["endpoint"]) == pytest.approx(math.tan(th / 2), abs=1e-9)


def test_figure3_files(tmp_path):
    paths = figure_data(3, None, str(tmp_path))
    assert len(paths) == 10
    curves = [p for p in paths if "asymptote" not in p]
    for p in curves:
        meta, data = _read(p)
        assert meta["termination"] == "reached_end"
        assert data[-1, 0] == pytest.approx(0.1)


def test_figure_id_validation(tmp_path):
    with pytest.raises(DomainError):
        figure_data(4, None, str(tmp_path))
