import math
import os

import numpy as np
import pytest

from rotgpe.elements import ElementKind, FeSpace
from rotgpe.harness import (CONVERGENCE_HEADER, SERIES_HEADER, ConvergenceTable,
                            RunConfig, density_grid, fmt, initial_field,
                            load_checkpoint, make_forms, make_space,
                            manufactured_solution, observed_rates, parse_config,
                            read_snapshot, run_accuracy, run_conservation,
                            run_evolution, run_groundstate, scheme_config,
                            validate_manufactured, write_checkpoint,
                            write_series, write_snapshot)
from rotgpe.mesh import RectDomain, build_mesh
from rotgpe.observables import ExactSolution, ObservableRecord, mass_of
from rotgpe.scheme import Field

QUICK = RunConfig(nx=8, ny=8, tau=0.05, T=0.2)


def _field(cfg=QUICK):
    space = make_space(cfg)
    forms = make_forms(cfg, space)
    return initial_field(cfg, space, forms), space, forms


# ------------------------------------------------------------------ formatting

def test_fmt_round_trips_doubles():
    rng = np.random.default_rng(0)
    vals = np.concatenate([
        rng.standard_normal(50) * 10.0 ** rng.integers(-300, 300, 50),
        [0.0, 0.1, 1.0 / 3.0, np.pi * 1e17, -2.5e-308, 6.02214076e23],
    ])
    for v in vals:
        assert float(fmt(v)) == v
    assert math.isnan(float(fmt(float("nan"))))


# ----------------------------------------------------------------- config file

def test_parse_config(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text(
        "# comment line\n"
        "element = eq1rot\n"
        "nx= 12\n"
        "ny =10\n"
        "tau = 0.025   # trailing comment\n"
        "beta = -1.5\n"
        "snapshots = 0.0, 0.5, 1.0\n"
        "\n"
        "initial = vortex\n")
    cfg = parse_config(p, base=RunConfig(omega=0.3))
    assert cfg.element == "eq1rot"
    assert (cfg.nx, cfg.ny) == (12, 10)
    assert cfg.tau == 0.025
    assert cfg.beta == -1.5
    assert cfg.snapshots == (0.0, 0.5, 1.0)
    assert cfg.initial == "vortex"
    assert cfg.omega == 0.3          # base value survives
    assert cfg.T == 1.0              # untouched default


def test_parse_config_rejects_bad_lines(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("nx = 8\nwavelength = 3\n")
    with pytest.raises(ValueError, match="bad.cfg:2.*wavelength"):
        parse_config(p)
    p.write_text("just some words\n")
    with pytest.raises(ValueError, match="key=value"):
        parse_config(p)


# -------------------------------------------------------------- snapshot files

@pytest.mark.parametrize("kind", [ElementKind.Q1, ElementKind.EQ1ROT])
def test_density_snapshot_round_trip(tmp_path, kind):
    cfg = RunConfig(element=kind.value, xmin=-1.5, xmax=2.0, ymin=0.5,
                    ymax=1.25, nx=6, ny=4)
    u, space, forms = _field(cfg)
    path = tmp_path / "density.snap"
    write_snapshot(path, u, 0.375)
    snap = read_snapshot(path)
    assert (snap.nx, snap.ny) == (6, 4)
    assert (snap.xmin, snap.xmax, snap.ymin, snap.ymax) == (-1.5, 2.0, 0.5, 1.25)
    assert snap.t == 0.375
    assert snap.payload == "density"
    grid, gridkind = density_grid(u)
    assert snap.grid == gridkind
    assert snap.values.shape == grid.shape
    assert np.array_equal(snap.values, grid)   # 17 digits: exact round trip


def test_density_grid_shapes():
    for kind, shape in ((ElementKind.Q1, (5, 7)), (ElementKind.EQ1ROT, (4, 6))):
        cfg = RunConfig(element=kind.value, nx=6, ny=4)
        u, _, _ = _field(cfg)
        grid, _ = density_grid(u)
        assert grid.shape == shape
        assert grid.min() >= 0.0


@pytest.mark.parametrize("kind", [ElementKind.Q1, ElementKind.EQ1ROT])
def test_checkpoint_round_trip(tmp_path, kind):
    cfg = RunConfig(element=kind.value, nx=5, ny=3, initial="vortex")
    u, space, forms = _field(cfg)
    path = tmp_path / "state.snap"
    write_checkpoint(path, u, 1.25)
    back, t = load_checkpoint(path, space)
    assert t == 1.25
    assert np.array_equal(back.coeffs, u.coeffs)


def test_checkpoint_validation(tmp_path):
    cfg = RunConfig(nx=5, ny=3)
    u, space, forms = _field(cfg)
    ck = tmp_path / "state.snap"
    write_checkpoint(ck, u, 0.0)

    other = make_space(RunConfig(nx=6, ny=3))
    with pytest.raises(ValueError, match="5x3"):
        load_checkpoint(ck, other)
    wrong_kind = make_space(RunConfig(element="eq1rot", nx=5, ny=3))
    with pytest.raises(ValueError):
        load_checkpoint(ck, wrong_kind)

    dens = tmp_path / "density.snap"
    write_snapshot(dens, u, 0.0)
    with pytest.raises(ValueError, match="not a DOF checkpoint"):
        load_checkpoint(dens, space)

    bad = tmp_path / "bad.snap"
    bad.write_text("not a snapshot\n1 2 3\n")
    with pytest.raises(ValueError, match="not a snapshot"):
        read_snapshot(bad)

    truncated = tmp_path / "short.snap"
    lines = ck.read_text().splitlines()
    truncated.write_text("\n".join(lines[:-3]) + "\n")
    with pytest.raises(ValueError, match="expected"):
        read_snapshot(truncated)


def test_initial_field_variants(tmp_path):
    u, space, forms = _field(QUICK)
    assert abs(mass_of(u, forms) - 1.0) < 1e-12

    vcfg = RunConfig(nx=8, ny=8, initial="vortex")
    v, _, _ = _field(vcfg)
    assert abs(mass_of(v, forms) - 1.0) < 1e-12
    assert np.abs(v.coeffs.imag).max() > 0

    ck = tmp_path / "u0.snap"
    write_checkpoint(ck, u, 0.7)
    fcfg = RunConfig(nx=8, ny=8, initial=f"file:{ck}")
    w = initial_field(fcfg, space, forms)
    assert np.array_equal(w.coeffs, u.coeffs)

    with pytest.raises(ValueError, match="ring"):
        _field(RunConfig(nx=4, ny=4, initial="ring"))


# ----------------------------------------------------------------- CSV outputs

def test_series_format(tmp_path):
    recs = [ObservableRecord(t=0.1 * k, mass=1.0 + 1e-16 * k, energy=-2.0,
                             rel_mass_err=1e-16 * k, rel_energy_err=0.0,
                             h1_norm=3.0, fp_iters=k) for k in range(3)]
    path = tmp_path / "series.csv"
    write_series(path, recs)
    lines = path.read_text().splitlines()
    assert lines[0] == SERIES_HEADER
    assert len(lines) == 4
    cells = lines[2].split(",")
    assert len(cells) == 6
    assert float(cells[0]) == 0.1
    assert float(cells[1]) == 1.0 + 1e-16
    assert cells[5] == "1"


def test_observed_rates():
    rates = observed_rates([1.0, 0.25, 0.0625])
    assert math.isnan(rates[0])
    assert rates[1:] == [2.0, 2.0]


def test_convergence_table_write(tmp_path):
    tab = ConvergenceTable(element="q1")
    for h, e in ((0.25, 1e-2), (0.125, 2.5e-3)):
        tab.h.append(h)
        tab.tau.append(h)
        tab.l2.append(e)
        tab.h1.append(10 * e)
        tab.superclose.append(e / 2)
        tab.postproc.append(e / 3)
    path = tmp_path / "conv.csv"
    tab.write(path)
    lines = path.read_text().splitlines()
    assert lines[0] == CONVERGENCE_HEADER
    assert len(lines[0].split(",")) == 10
    row0 = lines[1].split(",")
    row1 = lines[2].split(",")
    assert math.isnan(float(row0[3]))       # first rate column is nan
    assert float(row1[3]) == pytest.approx(2.0)
    assert float(row1[0]) == 0.125


# --------------------------------------------------------- manufactured source

def test_manufactured_source_validates():
    exact = manufactured_solution(0.8, 1.0, 1.0, 2.0)
    resid = validate_manufactured(exact, 0.8, 1.0, 1.0, 2.0)
    assert resid < 1e-5


def test_manufactured_validation_catches_corruption():
    exact = manufactured_solution(0.8, 1.0, 1.0, 2.0)
    bad = ExactSolution(
        value=exact.value, grad=exact.grad,
        source=lambda x, y, t: 1.001 * exact.source(x, y, t))
    with pytest.raises(ValueError, match="residual"):
        validate_manufactured(bad, 0.8, 1.0, 1.0, 2.0)
    with pytest.raises(ValueError, match="residual"):
        # mismatched rotation speed
        validate_manufactured(exact, 0.5, 1.0, 1.0, 2.0)


# ------------------------------------------------------------------ experiments

def test_run_conservation(tmp_path):
    final, records = run_conservation(QUICK, tmp_path)
    assert len(records) == 5
    assert records[0].rel_mass_err == 0.0 and records[0].fp_iters == 0
    assert max(abs(r.rel_mass_err) for r in records) < 1e-12
    assert max(abs(r.rel_energy_err) for r in records) < 1e-12
    series = tmp_path / "series_q1.csv"
    assert series.exists()
    data = np.genfromtxt(series, delimiter=",", names=True)
    assert data.shape == (5,)
    assert list(data.dtype.names) == SERIES_HEADER.split(",")


def test_run_evolution(tmp_path):
    cfg = RunConfig(element="eq1rot", nx=8, ny=8, tau=0.05, T=0.2,
                    snapshots=(0.0, 0.1, 0.2), initial="vortex")
    final, records, written = run_evolution(cfg, tmp_path)
    assert [os.path.basename(p) for p in written] == [
        "snapshot_eq1rot_000.snap", "snapshot_eq1rot_001.snap",
        "snapshot_eq1rot_002.snap"]
    times = [read_snapshot(p).t for p in written]
    assert times == [0.0, 0.1, 0.2]
    back, t = load_checkpoint(tmp_path / "checkpoint_eq1rot.snap",
                              make_space(cfg))
    assert t == 0.2
    assert np.array_equal(back.coeffs, final.coeffs)


def test_run_evolution_snapshot_validation(tmp_path):
    bad_time = RunConfig(nx=4, ny=4, tau=0.05, T=0.2, snapshots=(0.03,))
    with pytest.raises(ValueError, match="multiple of tau"):
        run_evolution(bad_time, tmp_path)
    outside = RunConfig(nx=4, ny=4, tau=0.05, T=0.2, snapshots=(0.3,))
    with pytest.raises(ValueError, match="outside"):
        run_evolution(outside, tmp_path)


def test_run_accuracy(tmp_path):
    cfg = RunConfig(nx=8, ny=8, tau=0.125, T=1.0)
    table = run_accuracy(cfg, tmp_path, levels=2)
    assert table.h == [0.125, 0.0625]
    assert table.tau == [0.125, 0.0625]
    rates = table.rates()
    assert 1.5 < rates["l2"][1] < 2.5
    assert 0.8 < rates["h1"][1] < 1.2
    csv = tmp_path / "convergence_q1.csv"
    data = np.genfromtxt(csv, delimiter=",", names=True)
    assert list(data.dtype.names) == CONVERGENCE_HEADER.split(",")
    assert data["l2_err"].tolist() == table.l2

    skewed = RunConfig(nx=8, ny=8, xmax=2.0)
    with pytest.raises(ValueError, match="square"):
        run_accuracy(skewed, tmp_path)


def test_run_groundstate(tmp_path):
    cfg = RunConfig(xmin=-4, xmax=4, ymin=-4, ymax=4, nx=12, ny=12,
                    omega=0.0, beta=5.0, gammax=1.0, gammay=1.0)
    result = run_groundstate(cfg, tmp_path)
    assert result.converged
    dens = read_snapshot(tmp_path / "groundstate_q1.snap")
    assert dens.payload == "density"
    back, _ = load_checkpoint(tmp_path / "groundstate_dofs_q1.snap",
                              make_space(cfg))
    assert np.array_equal(back.coeffs, result.field.coeffs)


def test_scheme_config_mapping():
    scfg = scheme_config(RunConfig(tau=0.02, T=0.5, omega=0.7, beta=-2.0,
                                   fp_tol=1e-11, fp_max_iters=33))
    assert (scfg.tau, scfg.t_final) == (0.02, 0.5)
    assert (scfg.omega, scfg.beta) == (0.7, -2.0)
    assert (scfg.fp_tol, scfg.fp_max_iters) == (1e-11, 33)
