"""Parsers for the solver's three output file kinds.

These are deliberately independent of the solver package; the files are the
interface.  Schemas:

convergence CSV
    header  h,tau,l2_err,l2_rate,h1_err,h1_rate,superclose_err,
            superclose_rate,postproc_err,postproc_rate
    one row per mesh level, coarsest first; rate cells hold the log2 error
    ratio against the previous row ("nan" on the first row).

series CSV
    header  t,mass,rel_mass_err,energy,rel_energy_err,fp_iters
    one row per time step including t=0.

snapshot (density or checkpoint)
    # rotgpe-snapshot v1
    # nx=<int> ny=<int> xmin=<f> xmax=<f> ymin=<f> ymax=<f> t=<f> [extras]
    density: (ny+1) rows x (nx+1) columns of nodal |u|^2, or with the
    extra token grid=cell an ny x nx grid of cell averages; checkpoint:
    extras payload=dofs element=<kind> ndofs=<n>, then n real values and
    n imaginary values, one per line.

All floats are written with 17 significant digits, so parsing and
re-serializing a file reproduces it byte for byte (see write_snapshot).
"""

from dataclasses import dataclass, field

import numpy as np

CONVERGENCE_COLUMNS = ("h", "tau", "l2_err", "l2_rate", "h1_err", "h1_rate",
                       "superclose_err", "superclose_rate", "postproc_err",
                       "postproc_rate")
SERIES_COLUMNS = ("t", "mass", "rel_mass_err", "energy", "rel_energy_err",
                  "fp_iters")
ERROR_NAMES = ("l2", "h1", "superclose", "postproc")

MAGIC = "# rotgpe-snapshot v1"


def _fmt(x):
    return f"{x:.17g}"


def _parse_row(path, lineno, line, width):
    cells = line.split(",")
    if len(cells) != width:
        raise ValueError(f"{path}:{lineno}: expected {width} columns, "
                         f"got {len(cells)}")
    try:
        return [float(c) for c in cells]
    except ValueError as exc:
        raise ValueError(f"{path}:{lineno}: {exc}") from None


@dataclass
class ConvergenceTable:
    h: np.ndarray
    tau: np.ndarray
    errors: dict        # name -> array, names in ERROR_NAMES order
    rates: dict         # name -> array, first entry nan

    def __len__(self):
        return len(self.h)


def read_convergence(path):
    with open(path) as fh:
        header = fh.readline().strip()
        if header.split(",") != list(CONVERGENCE_COLUMNS):
            raise ValueError(f"{path}:1: bad convergence header {header!r}")
        rows = [_parse_row(path, lineno, line.strip(), len(CONVERGENCE_COLUMNS))
                for lineno, line in enumerate(fh, 2) if line.strip()]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.array(rows)
    errors = {name: data[:, 2 + 2 * i] for i, name in enumerate(ERROR_NAMES)}
    rates = {name: data[:, 3 + 2 * i] for i, name in enumerate(ERROR_NAMES)}
    return ConvergenceTable(h=data[:, 0], tau=data[:, 1],
                            errors=errors, rates=rates)


@dataclass
class Series:
    t: np.ndarray
    mass: np.ndarray
    rel_mass_err: np.ndarray
    energy: np.ndarray
    rel_energy_err: np.ndarray
    fp_iters: np.ndarray


def read_series(path):
    with open(path) as fh:
        header = fh.readline().strip()
        if header.split(",") != list(SERIES_COLUMNS):
            raise ValueError(f"{path}:1: bad series header {header!r}")
        rows = [_parse_row(path, lineno, line.strip(), len(SERIES_COLUMNS))
                for lineno, line in enumerate(fh, 2) if line.strip()]
    if not rows:
        raise ValueError(f"{path}: series file has no data rows")
    data = np.array(rows)
    return Series(t=data[:, 0], mass=data[:, 1], rel_mass_err=data[:, 2],
                  energy=data[:, 3], rel_energy_err=data[:, 4],
                  fp_iters=data[:, 5].astype(int))


@dataclass
class Snapshot:
    nx: int
    ny: int
    xmin: float
    xmax: float
    ymin: float
    ymax: float
    t: float
    grid: str = "node"          # node | cell
    payload: str = "density"    # density | dofs
    element: str = ""
    values: np.ndarray = field(default=None)

    @property
    def extent(self):
        return (self.xmin, self.xmax, self.ymin, self.ymax)


def read_snapshot(path):
    with open(path) as fh:
        magic = fh.readline().rstrip("\n")
        if magic != MAGIC:
            raise ValueError(f"{path}:1: expected {MAGIC!r}, got {magic!r}")
        meta = {}
        for tok in fh.readline().lstrip("#").split():
            if "=" not in tok:
                raise ValueError(f"{path}:2: bad header token {tok!r}")
            key, val = tok.split("=", 1)
            meta[key] = val
        missing = {"nx", "ny", "xmin", "xmax", "ymin", "ymax", "t"} - set(meta)
        if missing:
            raise ValueError(f"{path}:2: header missing {sorted(missing)}")
        snap = Snapshot(nx=int(meta["nx"]), ny=int(meta["ny"]),
                        xmin=float(meta["xmin"]), xmax=float(meta["xmax"]),
                        ymin=float(meta["ymin"]), ymax=float(meta["ymax"]),
                        t=float(meta["t"]), grid=meta.get("grid", "node"),
                        payload=meta.get("payload", "density"),
                        element=meta.get("element", ""))
        raw = np.array(fh.read().split(), dtype=np.float64)
    if snap.payload == "dofs":
        n = int(meta.get("ndofs", -1))
        if raw.size != 2 * n:
            raise ValueError(f"{path}: checkpoint needs {2 * n} values, "
                             f"got {raw.size}")
        snap.values = raw[:n] + 1j * raw[n:]
    else:
        shape = ((snap.ny, snap.nx) if snap.grid == "cell"
                 else (snap.ny + 1, snap.nx + 1))
        if raw.size != shape[0] * shape[1]:
            raise ValueError(f"{path}: density grid should be {shape}, "
                             f"got {raw.size} values")
        snap.values = raw.reshape(shape)
    return snap


def write_snapshot(snap, path):
    """Re-serialize a snapshot; parsing then writing reproduces the original
    file byte for byte (both sides print 17 significant digits)."""
    head = (f"# nx={snap.nx} ny={snap.ny} xmin={_fmt(snap.xmin)}"
            f" xmax={_fmt(snap.xmax)} ymin={_fmt(snap.ymin)}"
            f" ymax={_fmt(snap.ymax)} t={_fmt(snap.t)}")
    if snap.payload == "dofs":
        head += f" payload=dofs element={snap.element} ndofs={snap.values.size}"
    elif snap.grid == "cell":
        head += " grid=cell"
    with open(path, "w") as fh:
        fh.write(MAGIC + "\n" + head + "\n")
        if snap.payload == "dofs":
            for block in (snap.values.real, snap.values.imag):
                for v in block:
                    fh.write(_fmt(v) + "\n")
        else:
            for row in snap.values:
                fh.write(" ".join(_fmt(v) for v in row) + "\n")
