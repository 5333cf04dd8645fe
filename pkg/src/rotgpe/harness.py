"""Experiment drivers and the package's on-disk formats.

Config files are plain ``key = value`` lines (# starts a comment).  The
recognized keys are: element, xmin, xmax, ymin, ymax, nx, ny, tau, T,
omega, beta, gammax, gammay, fp_tol, fp_max_iters, snapshots (comma
separated times), initial (gaussian | vortex | file:<path>).

All floating point output uses 17 significant digits so files round-trip
bit-exactly.  Formats:

- time series CSV, header
  ``t,mass,rel_mass_err,energy,rel_energy_err,fp_iters``
- convergence CSV, header
  ``h,tau,l2_err,l2_rate,h1_err,h1_rate,superclose_err,superclose_rate,postproc_err,postproc_rate``
- snapshots: two comment lines
  ``# rotgpe-snapshot v1`` and ``# nx=.. ny=.. xmin=.. xmax=.. ymin=.. ymax=.. t=..``
  followed by a grid of |u|^2 values, one row per line: nodal values on a
  (ny+1) x (nx+1) grid by default, cell averages on ny x nx with the extra
  header flag ``grid=cell`` (used by the edge-mean element, which has no
  nodal values).  Complex DOF checkpoints use the same header with
  ``payload=dofs element=<kind> ndofs=<n>`` and two blocks of n values
  (real parts, then imaginary parts), one value per line.
"""

import os
from dataclasses import dataclass, field, replace

import numpy as np

from rotgpe.assembly import PotentialSpec, build_forms
from rotgpe.elements import ElementKind, FeSpace
from rotgpe.groundstate import GroundStateConfig, gradient_flow_ground_state
from rotgpe.mesh import RectDomain, build_mesh
from rotgpe.observables import (ExactSolution, ObservableRecord, broken_h1_norm,
                                energy_h_of, error_norms, interpolate_exact,
                                mass_of, postprocessed_h1_error, superclose_norm)
from rotgpe.scheme import Field, SchemeConfig, evolve


def fmt(x):
    """17 significant digit float formatting used in every output file."""
    return f"{x:.17g}"


# --- run configuration ------------------------------------------------------

@dataclass
class RunConfig:
    element: str = "q1"
    xmin: float = 0.0
    xmax: float = 1.0
    ymin: float = 0.0
    ymax: float = 1.0
    nx: int = 32
    ny: int = 32
    tau: float = 0.01
    T: float = 1.0
    omega: float = 0.8
    beta: float = 1.0
    gammax: float = 1.0
    gammay: float = 2.0
    fp_tol: float = 1e-13
    fp_max_iters: int = 100
    snapshots: tuple = ()
    initial: str = "gaussian"

    def domain(self):
        return RectDomain(self.xmin, self.xmax, self.ymin, self.ymax)


_INT_KEYS = {"nx", "ny", "fp_max_iters"}
_FLOAT_KEYS = {"xmin", "xmax", "ymin", "ymax", "tau", "T", "omega", "beta",
               "gammax", "gammay", "fp_tol"}
_STR_KEYS = {"element", "initial"}


def parse_config(path, base=None):
    """Read a key=value config file on top of `base` (default RunConfig())."""
    cfg = base or RunConfig()
    updates = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            if key in _INT_KEYS:
                updates[key] = int(val)
            elif key in _FLOAT_KEYS:
                updates[key] = float(val)
            elif key in _STR_KEYS:
                updates[key] = val
            elif key == "snapshots":
                updates[key] = tuple(float(s) for s in val.split(",") if s.strip())
            else:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
    return replace(cfg, **updates)


def make_space(cfg):
    mesh = build_mesh(cfg.domain(), cfg.nx, cfg.ny)
    return FeSpace(mesh, ElementKind(cfg.element))


def make_forms(cfg, space=None):
    space = space or make_space(cfg)
    return build_forms(space, PotentialSpec.harmonic(cfg.gammax, cfg.gammay))


def scheme_config(cfg):
    return SchemeConfig(tau=cfg.tau, t_final=cfg.T, omega=cfg.omega,
                        beta=cfg.beta, fp_tol=cfg.fp_tol,
                        fp_max_iters=cfg.fp_max_iters)


def initial_field(cfg, space, forms):
    """Starting data named by cfg.initial, normalized to unit mass
    (checkpoint files are loaded as-is)."""
    if cfg.initial.startswith("file:"):
        u, _ = load_checkpoint(cfg.initial[5:], space)
        return u
    d = space.mesh.domain
    cx, cy = 0.5 * (d.xmin + d.xmax), 0.5 * (d.ymin + d.ymax)
    sigma = 0.12 * min(d.width, d.height)

    def fn(x, y):
        g = np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * sigma ** 2))
        if cfg.initial == "vortex":
            return ((x - cx) + 1j * (y - cy)) * g
        if cfg.initial == "gaussian":
            return g + 0j
        raise ValueError(f"unknown initial profile {cfg.initial!r}")

    u = Field(space, space.interpolate(fn))
    u.coeffs /= np.sqrt(mass_of(u, forms))
    return u


# --- file formats -----------------------------------------------------------

def _snapshot_header(mesh, t, extra=""):
    d = mesh.domain
    line = (f"# nx={mesh.nx} ny={mesh.ny} xmin={fmt(d.xmin)} xmax={fmt(d.xmax)}"
            f" ymin={fmt(d.ymin)} ymax={fmt(d.ymax)} t={fmt(t)}")
    if extra:
        line += " " + extra
    return "# rotgpe-snapshot v1\n" + line + "\n"


def density_grid(u):
    """|u_h|^2 sampled the way the element can: nodal values for Q1
    ((ny+1) x (nx+1)), cell averages for EQ1ROT (ny x nx)."""
    space = u.space
    mesh = space.mesh
    if space.kind == ElementKind.Q1:
        return np.abs(u.coeffs.reshape(mesh.ny + 1, mesh.nx + 1)) ** 2, "node"
    vals = np.abs(space.eval_at_quad(u.coeffs)) ** 2
    means = (vals @ space.quad.weights) / 4.0
    return means.reshape(mesh.ny, mesh.nx), "cell"


def write_snapshot(path, u, t):
    grid, kind = density_grid(u)
    extra = "grid=cell" if kind == "cell" else ""
    with open(path, "w") as fh:
        fh.write(_snapshot_header(u.space.mesh, t, extra))
        for row in grid:
            fh.write(" ".join(fmt(v) for v in row) + "\n")


def write_checkpoint(path, u, t):
    space = u.space
    extra = f"payload=dofs element={space.kind.value} ndofs={space.n_dofs}"
    with open(path, "w") as fh:
        fh.write(_snapshot_header(space.mesh, t, extra))
        for block in (u.coeffs.real, u.coeffs.imag):
            for v in block:
                fh.write(fmt(v) + "\n")


@dataclass
class Snapshot:
    nx: int
    ny: int
    xmin: float
    xmax: float
    ymin: float
    ymax: float
    t: float
    grid: str = "node"          # "node" | "cell"
    payload: str = "density"    # "density" | "dofs"
    element: str = ""
    values: np.ndarray = None   # density grid, or complex dof vector


def read_snapshot(path):
    with open(path) as fh:
        magic = fh.readline().strip()
        if magic != "# rotgpe-snapshot v1":
            raise ValueError(f"{path}: not a snapshot file (got {magic!r})")
        meta = {}
        for tok in fh.readline().lstrip("#").split():
            key, val = tok.split("=", 1)
            meta[key] = val
        snap = Snapshot(nx=int(meta["nx"]), ny=int(meta["ny"]),
                        xmin=float(meta["xmin"]), xmax=float(meta["xmax"]),
                        ymin=float(meta["ymin"]), ymax=float(meta["ymax"]),
                        t=float(meta["t"]), grid=meta.get("grid", "node"),
                        payload=meta.get("payload", "density"),
                        element=meta.get("element", ""))
        data = np.array(fh.read().split(), dtype=np.float64)
    if snap.payload == "dofs":
        n = int(meta["ndofs"])
        if data.size != 2 * n:
            raise ValueError(f"{path}: expected {2*n} values, got {data.size}")
        snap.values = data[:n] + 1j * data[n:]
    else:
        shape = ((snap.ny, snap.nx) if snap.grid == "cell"
                 else (snap.ny + 1, snap.nx + 1))
        if data.size != shape[0] * shape[1]:
            raise ValueError(f"{path}: expected {shape} density grid, got {data.size} values")
        snap.values = data.reshape(shape)
    return snap


def load_checkpoint(path, space):
    """Read a DOF checkpoint back into the given space."""
    snap = read_snapshot(path)
    if snap.payload != "dofs":
        raise ValueError(f"{path}: not a DOF checkpoint")
    mesh = space.mesh
    if (snap.nx, snap.ny) != (mesh.nx, mesh.ny) or snap.element != space.kind.value:
        raise ValueError(f"{path}: checkpoint is {snap.element} {snap.nx}x{snap.ny}, "
                         f"space is {space.kind.value} {mesh.nx}x{mesh.ny}")
    if snap.values.size != space.n_dofs:
        raise ValueError(f"{path}: {snap.values.size} dofs, space has {space.n_dofs}")
    return Field(space, snap.values), snap.t


SERIES_HEADER = "t,mass,rel_mass_err,energy,rel_energy_err,fp_iters"


def write_series(path, records):
    with open(path, "w") as fh:
        fh.write(SERIES_HEADER + "\n")
        for r in records:
            fh.write(",".join([fmt(r.t), fmt(r.mass), fmt(r.rel_mass_err),
                               fmt(r.energy), fmt(r.rel_energy_err),
                               str(r.fp_iters)]) + "\n")


CONVERGENCE_HEADER = ("h,tau,l2_err,l2_rate,h1_err,h1_rate,"
                      "superclose_err,superclose_rate,postproc_err,postproc_rate")


def observed_rates(errors):
    """log2 error ratios between consecutive halvings; nan for the first row."""
    out = [float("nan")]
    for a, b in zip(errors, errors[1:]):
        out.append(float(np.log2(a / b)))
    return out


@dataclass
class ConvergenceTable:
    element: str
    h: list = field(default_factory=list)
    tau: list = field(default_factory=list)
    l2: list = field(default_factory=list)
    h1: list = field(default_factory=list)
    superclose: list = field(default_factory=list)
    postproc: list = field(default_factory=list)

    def rates(self):
        return {name: observed_rates(getattr(self, name))
                for name in ("l2", "h1", "superclose", "postproc")}

    def write(self, path):
        rates = self.rates()
        with open(path, "w") as fh:
            fh.write(CONVERGENCE_HEADER + "\n")
            for i in range(len(self.h)):
                row = [fmt(self.h[i]), fmt(self.tau[i])]
                for name in ("l2", "h1", "superclose", "postproc"):
                    row.append(fmt(getattr(self, name)[i]))
                    row.append(fmt(rates[name][i]))
                fh.write(",".join(row) + "\n")


# --- manufactured solution --------------------------------------------------

def manufactured_solution(omega, beta, gamma_x, gamma_y):
    """Separable polynomial-in-time reference solution with the driving term
    that makes it solve the forced equation
    i u_t = -1/2 lap(u) + V u - Omega Lz u + beta |u|^2 u + f."""
    gx2, gy2 = gamma_x ** 2, gamma_y ** 2

    def value(x, y, t):
        return (1.0 + t) ** 2 * np.sin(np.pi * x) * np.sin(np.pi * y) + 0j

    def grad(x, y, t):
        amp = (1.0 + t) ** 2 * np.pi
        return (amp * np.cos(np.pi * x) * np.sin(np.pi * y),
                amp * np.sin(np.pi * x) * np.cos(np.pi * y))

    def source(x, y, t):
        sx, cx = np.sin(np.pi * x), np.cos(np.pi * x)
        sy, cy = np.sin(np.pi * y), np.cos(np.pi * y)
        amp = (1.0 + t) ** 2
        u = amp * sx * sy
        dtu = 2.0 * (1.0 + t) * sx * sy
        lap = -2.0 * np.pi ** 2 * u
        V = 0.5 * (gx2 * x ** 2 + gy2 * y ** 2)
        # Lz u = -i (x du/dy - y du/dx)
        lz = -1j * amp * np.pi * (x * sx * cy - y * cx * sy)
        return (1j * dtu + 0.5 * lap - V * u + omega * lz - beta * u ** 3)

    return ExactSolution(value=value, grad=grad, source=source)


def validate_manufactured(exact, omega, beta, gamma_x, gamma_y,
                          n=50, seed=7, tol=1e-5):
    """Check the closed-form source against a finite-difference residual of
    the exact solution at random points; guards against derivation slips."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.05, 0.95, n)
    y = rng.uniform(0.05, 0.95, n)
    t = rng.uniform(0.0, 1.0, n)
    dt, dx = 1e-6, 1e-4
    u = exact.value
    dtu = (u(x, y, t + dt) - u(x, y, t - dt)) / (2 * dt)
    lap = ((u(x + dx, y, t) + u(x - dx, y, t) + u(x, y + dx, t)
            + u(x, y - dx, t) - 4 * u(x, y, t)) / dx ** 2)
    ux = (u(x + dx, y, t) - u(x - dx, y, t)) / (2 * dx)
    uy = (u(x, y + dx, t) - u(x, y - dx, t)) / (2 * dx)
    V = 0.5 * (gamma_x ** 2 * x ** 2 + gamma_y ** 2 * y ** 2)
    lz = -1j * (x * uy - y * ux)
    resid = (1j * dtu + 0.5 * lap - V * u(x, y, t) + omega * lz
             - beta * np.abs(u(x, y, t)) ** 2 * u(x, y, t)
             - exact.source(x, y, t))
    worst = float(np.abs(resid).max())
    if worst > tol:
        raise ValueError(f"manufactured source residual {worst:.3e} exceeds {tol:.1e}")
    return worst


# --- experiment drivers -----------------------------------------------------

def _observing_evolve(u0, forms, cfg, source, on_record=None, snapshot_times=(),
                      snapshot_cb=None):
    records = []
    m0 = mass_of(u0, forms)
    e0 = energy_h_of(u0, forms, cfg)
    records.append(ObservableRecord(t=0.0, mass=m0, energy=e0, rel_mass_err=0.0,
                                    rel_energy_err=0.0,
                                    h1_norm=broken_h1_norm(u0), fp_iters=0))
    times = sorted(snapshot_times)
    for st in times:
        if st < -1e-12 or st > cfg.t_final + 1e-12:
            raise ValueError(f"snapshot time {st} outside [0, {cfg.t_final}]")
        if abs(st / cfg.tau - round(st / cfg.tau)) > 1e-12 * max(1.0, abs(st / cfg.tau)):
            raise ValueError(f"snapshot time {st} is not a multiple of tau={cfg.tau}")
    snap_steps = {round(st / cfg.tau): st for st in times}
    if 0 in snap_steps and snapshot_cb is not None:
        snapshot_cb(u0, 0.0, 0)

    def observer(n, t, u, rep):
        m = mass_of(u, forms)
        e = energy_h_of(u, forms, cfg)
        rec = ObservableRecord(t=t, mass=m, energy=e,
                               rel_mass_err=(m - m0) / m0,
                               rel_energy_err=(e - e0) / abs(e0) if e0 != 0 else e - e0,
                               h1_norm=broken_h1_norm(u), fp_iters=rep.fp_iters)
        records.append(rec)
        if on_record is not None:
            on_record(rec)
        if n in snap_steps and snapshot_cb is not None:
            snapshot_cb(u, snap_steps[n], n)

    final = evolve(u0, forms, cfg, f=source, observer=observer)
    return final, records


def run_conservation(cfg, out_dir):
    """Unforced evolution tracking mass and energy drift every step."""
    os.makedirs(out_dir, exist_ok=True)
    space = make_space(cfg)
    forms = make_forms(cfg, space)
    scfg = scheme_config(cfg)
    u0 = initial_field(cfg, space, forms)
    final, records = _observing_evolve(u0, forms, scfg, source=None)
    write_series(os.path.join(out_dir, f"series_{cfg.element}.csv"), records)
    return final, records


def run_evolution(cfg, out_dir):
    """Unforced evolution with density snapshots at the configured times."""
    os.makedirs(out_dir, exist_ok=True)
    space = make_space(cfg)
    forms = make_forms(cfg, space)
    scfg = scheme_config(cfg)
    u0 = initial_field(cfg, space, forms)
    written = []

    def snapshot_cb(u, t, n):
        path = os.path.join(out_dir, f"snapshot_{cfg.element}_{len(written):03d}.snap")
        write_snapshot(path, u, t)
        written.append(path)

    final, records = _observing_evolve(u0, forms, scfg, source=None,
                                       snapshot_times=cfg.snapshots,
                                       snapshot_cb=snapshot_cb)
    write_series(os.path.join(out_dir, f"series_{cfg.element}.csv"), records)
    write_checkpoint(os.path.join(out_dir, f"checkpoint_{cfg.element}.snap"),
                     final, cfg.T)
    return final, records, written


def run_accuracy(cfg, out_dir, levels=4):
    """Convergence study against the manufactured solution with tau = h,
    starting from cfg.nx cells and halving `levels` times in total."""
    os.makedirs(out_dir, exist_ok=True)
    if cfg.domain().width != cfg.domain().height:
        raise ValueError("accuracy study expects a square domain")
    exact = manufactured_solution(cfg.omega, cfg.beta, cfg.gammax, cfg.gammay)
    validate_manufactured(exact, cfg.omega, cfg.beta, cfg.gammax, cfg.gammay)
    table = ConvergenceTable(element=cfg.element)
    for lvl in range(levels):
        n = cfg.nx * 2 ** lvl
        lcfg = replace(cfg, nx=n, ny=n, tau=cfg.domain().width / n)
        space = make_space(lcfg)
        forms = make_forms(lcfg, space)
        scfg = scheme_config(lcfg)
        u0 = interpolate_exact(exact, 0.0, space)
        final = evolve(u0, forms, scfg, f=exact.source)
        errs = error_norms(final, exact, cfg.T)
        table.h.append(space.mesh.h)
        table.tau.append(lcfg.tau)
        table.l2.append(errs["l2"])
        table.h1.append(errs["h1"])
        table.superclose.append(superclose_norm(final, exact, cfg.T))
        table.postproc.append(postprocessed_h1_error(final, exact, cfg.T))
    table.write(os.path.join(out_dir, f"convergence_{cfg.element}.csv"))
    return table


def run_groundstate(cfg, out_dir):
    """Normalized gradient flow at the config's trap and interaction."""
    os.makedirs(out_dir, exist_ok=True)
    space = make_space(cfg)
    forms = make_forms(cfg, space)
    d = cfg.domain()
    profile = cfg.initial if cfg.initial in ("gaussian", "vortex") else "gaussian"
    gcfg = GroundStateConfig(omega=cfg.omega, beta=cfg.beta, profile=profile,
                             sigma=0.12 * min(d.width, d.height))
    u0 = None
    if cfg.initial.startswith("file:"):
        u0, _ = load_checkpoint(cfg.initial[5:], space)
    result = gradient_flow_ground_state(gcfg, forms, u0=u0)
    write_snapshot(os.path.join(out_dir, f"groundstate_{cfg.element}.snap"),
                   result.field, 0.0)
    write_checkpoint(os.path.join(out_dir, f"groundstate_dofs_{cfg.element}.snap"),
                     result.field, 0.0)
    return result
