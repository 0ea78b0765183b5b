"""Render-package tests against files fabricated from the documented formats."""

import json

import numpy as np
import pytest

from gradflow_report import (
    FigureJob,
    SchemaError,
    read_convergence,
    read_snapshot,
    read_trace,
    render_report,
)
from gradflow_report.cli import main

TRACE_HEADER = "step,t,E_orig,E_mod,R,F_int,p_value,s_value,lambda0,kappa,dissipation,branch"


def write_trace(path, n=20, seed=0, decay=1.0):
    rng = np.random.default_rng(seed)
    rows = [TRACE_HEADER]
    energy = 10.0
    for step in range(n):
        t = 0.01 * step
        energy = float(energy - decay * rng.uniform(0.0, 0.2))
        p = float(1e-3 * rng.standard_normal())
        diss = float(rng.uniform(0, 0.1))
        rows.append(
            f"{step},{t!r},{energy!r},{energy - 0.01!r},{energy!r},{energy!r},"
            f"{p!r},0.0,0.0,0.0,{diss!r},quadratic"
        )
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return path


def write_snapshot(path, dims, extents, time=0.5, model="demo", values=None):
    if values is None:
        rng = np.random.default_rng(1)
        values = rng.standard_normal(dims)
    header = " ".join(
        ["GFZF1", str(len(dims))]
        + [str(d) for d in dims]
        + [repr(float(x)) for x in extents]
        + [repr(float(time)), model]
    )
    path.write_bytes(header.encode() + b"\n" + np.ascontiguousarray(values, "<f8").tobytes())
    return path


def write_convergence(path, slope=2.0):
    dts = np.array([0.04, 0.02, 0.01, 0.005])
    errors = 0.5 * dts ** slope
    lines = ["dt,error,rate"]
    for i, (dt, err) in enumerate(zip(dts.tolist(), errors.tolist())):
        rate = repr(float(np.log2(errors[i - 1] / err))) if i else ""
        lines.append(f"{dt!r},{err!r},{rate}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


class TestReaders:
    def test_trace_round_trip(self, tmp_path):
        path = write_trace(tmp_path / "run.csv")
        trace = read_trace(path)
        assert trace["step"][0] == 0
        assert len(trace["t"]) == 20
        assert trace["branch"][0] == "quadratic"

    def test_trace_missing_column_named(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("step,t,E_orig\n0,0.0,1.0\n")
        with pytest.raises(SchemaError, match="E_mod"):
            read_trace(path)

    def test_empty_trace_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text(TRACE_HEADER + "\n")
        with pytest.raises(SchemaError, match="no rows"):
            read_trace(path)

    def test_snapshot_reader(self, tmp_path):
        values = np.arange(24, dtype=float).reshape(4, 6)
        path = write_snapshot(tmp_path / "f.gfzf", (4, 6), (1.0, 2.0), values=values)
        snap = read_snapshot(path)
        assert snap.dims == (4, 6)
        assert snap.extents == (1.0, 2.0)
        assert np.array_equal(snap.values, values)

    def test_snapshot_bad_payload(self, tmp_path):
        path = write_snapshot(tmp_path / "f.gfzf", (4, 4), (1.0, 1.0))
        blob = path.read_bytes()
        path.write_bytes(blob[:-8])
        with pytest.raises(SchemaError, match="payload"):
            read_snapshot(path)

    def test_convergence_reader(self, tmp_path):
        path = write_convergence(tmp_path / "conv.csv")
        dts, errors, rates = read_convergence(path)
        assert len(dts) == 4 and np.isnan(rates[0])


class TestRendering:
    def test_energy_compare_and_error(self, tmp_path):
        a = write_trace(tmp_path / "sav.csv", seed=1)
        b = write_trace(tmp_path / "rzf.csv", seed=2)
        jobs = [
            FigureJob("energy_compare", [str(a), str(b)], str(tmp_path / "cmp.png")),
            FigureJob("energy_error", [str(a)], str(tmp_path / "err.png")),
        ]
        render_report(jobs)
        assert (tmp_path / "cmp.png").stat().st_size > 0
        assert (tmp_path / "err.png").stat().st_size > 0

    def test_factor_trace(self, tmp_path):
        a = write_trace(tmp_path / "run.csv")
        render_report([FigureJob("factor_trace", [str(a)], str(tmp_path / "p.png"))])
        assert (tmp_path / "p.png").exists()

    def test_field_2d(self, tmp_path):
        x = np.linspace(0, 2 * np.pi, 32, endpoint=False)
        values = np.cos(x)[:, None] * np.cos(x)[None, :]
        path = write_snapshot(tmp_path / "f.gfzf", (32, 32),
                              (2 * np.pi, 2 * np.pi), values=values)
        render_report([FigureJob("field_2d", [str(path)], str(tmp_path / "f.png"))])
        assert (tmp_path / "f.png").exists()

    def test_field_3d_levelset(self, tmp_path):
        n = 24
        axis = np.linspace(0, 1, n, endpoint=False)
        x, y, z = np.meshgrid(axis, axis, axis, indexing="ij")
        values = 0.3 - np.sqrt((x - 0.5) ** 2 + (y - 0.5) ** 2 + (z - 0.5) ** 2)
        path = write_snapshot(tmp_path / "s.gfzf", (n, n, n), (1.0, 1.0, 1.0),
                              values=values)
        out = str(tmp_path / "iso.png")
        results = render_report([FigureJob("field_3d_levelset", [str(path)], out)])
        assert results[out]["vertices"] > 100

    def test_field_3d_level_outside_range(self, tmp_path):
        values = np.full((8, 8, 8), 2.0)
        path = write_snapshot(tmp_path / "s.gfzf", (8, 8, 8), (1.0,) * 3,
                              values=values)
        with pytest.raises(SchemaError, match="level"):
            render_report([
                FigureJob("field_3d_levelset", [str(path)], str(tmp_path / "x.png"))
            ])

    def test_convergence_slope(self, tmp_path):
        path = write_convergence(tmp_path / "conv.csv", slope=2.0)
        out = str(tmp_path / "conv.png")
        results = render_report([FigureJob("convergence_loglog", [str(path)], out)])
        assert results[out]["fitted_slope"] == pytest.approx(2.0, abs=0.01)

    def test_rerender_is_idempotent_and_never_mutates_inputs(self, tmp_path):
        a = write_trace(tmp_path / "run.csv")
        before = a.read_bytes()
        out = str(tmp_path / "p.png")
        render_report([FigureJob("factor_trace", [str(a)], out)])
        first = (tmp_path / "p.png").read_bytes()
        render_report([FigureJob("factor_trace", [str(a)], out)])
        assert (tmp_path / "p.png").read_bytes() == first
        assert a.read_bytes() == before

    def test_unknown_kind_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="unknown figure kind"):
            FigureJob("pie_chart", ["x.csv"], "y.png")

    def test_missing_input_rejected(self, tmp_path):
        job = FigureJob("factor_trace", [str(tmp_path / "none.csv")], "x.png")
        with pytest.raises(FileNotFoundError):
            render_report([job])


class TestCli:
    def test_render_verb_with_manifest(self, tmp_path):
        write_trace(tmp_path / "run.csv")
        write_convergence(tmp_path / "conv.csv")
        manifest = tmp_path / "jobs.json"
        manifest.write_text(json.dumps([
            {"kind": "factor_trace", "inputs": ["run.csv"], "output": "p.png"},
            {"kind": "convergence_loglog", "inputs": ["conv.csv"], "output": "c.png"},
        ]))
        out = tmp_path / "figs"
        code = main(["render", "--jobs", str(manifest), "--out", str(out)])
        assert code == 0
        assert (out / "p.png").exists() and (out / "c.png").exists()

    def test_schema_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("nope\n1\n")
        manifest = tmp_path / "jobs.json"
        manifest.write_text(json.dumps([
            {"kind": "factor_trace", "inputs": ["bad.csv"], "output": "p.png"},
        ]))
        assert main(["--jobs", str(manifest), "--out", str(tmp_path)]) == 2

    def test_missing_input_exit_code(self, tmp_path):
        manifest = tmp_path / "jobs.json"
        manifest.write_text(json.dumps([
            {"kind": "factor_trace", "inputs": ["none.csv"], "output": "p.png"},
        ]))
        assert main(["--jobs", str(manifest), "--out", str(tmp_path)]) == 4
