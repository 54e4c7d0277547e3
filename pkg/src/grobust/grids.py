"""Uniform space grid and the space-time value field both solvers emit."""

from __future__ import annotations


from dataclasses import dataclass
import numpy as np

__all__ = ["Grid1D", "ValueField", "write_field_csv", "read_field_csv"]


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    x_max: float
    n_x: int

    def __post_init__(self):
        if self.n_x < 3:
            raise ValueError(f"n_x must be >= 3, got {self.n_x}")
        if not (self.x_min < self.x_max):
            raise ValueError(f"need x_min < x_max, got [{self.x_min}, {self.x_max}]")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_x - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_x)

    @staticmethod
    def for_problem(problem, n_x: int) -> "Grid1D":
        return Grid1D(problem.x_min, problem.x_max, n_x)


@dataclass(frozen=True)
class ValueField:
    """V(t_k, x_i) on the uniform grid, rows are times t_k = t0 + k*dt."""

    grid: Grid1D
    t0: float
    dt: float
    values: np.ndarray  # shape (K+1, n_x)
    provenance: str     # "lattice" | "hjb" | "oracle"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[1] != self.grid.n_x:
            raise ValueError(
                f"values shape {vals.shape} does not match grid n_x={self.grid.n_x}"
            )
        if not np.all(np.isfinite(vals)):
            k, i = np.argwhere(~np.isfinite(vals))[0]
            raise ValueError(f"non-finite value at row {k}, node {i}")
        if self.provenance not in ("lattice", "hjb", "oracle"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if not (self.dt > 0.0):
            raise ValueError("dt must be positive")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_rows)

    def growth_constant(self) -> float:
        """Smallest L with |V| <= L (1 + |x|) on the whole field."""
        denom = 1.0 + np.abs(self.grid.nodes)
        return float(np.max(np.abs(self.values) / denom[None, :]))

    def value_at(self, t: float, x: float) -> float:
        """Bilinear interpolation in (t, x), clamped to the field extent."""
        times = self.times
        k = int(np.clip(np.searchsorted(times, t) - 1, 0, self.n_rows - 2))
        lam_t = np.clip((t - times[k]) / self.dt, 0.0, 1.0)
        nodes = self.grid.nodes
        i = int(np.clip(np.searchsorted(nodes, x) - 1, 0, self.grid.n_x - 2))
        lam_x = np.clip((x - nodes[i]) / self.grid.dx, 0.0, 1.0)
        row0 = self.values[k, i] + lam_x * (self.values[k, i + 1] - self.values[k, i])
        row1 = self.values[k + 1, i] + lam_x * (
            self.values[k + 1, i + 1] - self.values[k + 1, i])
        return float(row0 + lam_t * (row1 - row0))


def write_field_csv(field: ValueField, path_or_buf) -> None:
    """CSV with header ``t,x,v``, row-major by time then space, 17 digits."""
    close = False
    if isinstance(path_or_buf, (str, bytes)):
        buf = open(path_or_buf, "w", encoding="utf-8", newline="\n")
        close = True
    else:
        buf = path_or_buf
    try:
        buf.write("t,x,v\n")
        nodes = field.grid.nodes
        for k, t in enumerate(field.times):
            row = field.values[k]
            for i in range(field.grid.n_x):
                buf.write(f"{t:.17g},{nodes[i]:.17g},{row[i]:.17g}\n")
    finally:
        if close:
            buf.close()


def read_field_csv(path_or_buf, provenance: str = "lattice") -> ValueField:
    """Inverse of :func:`write_field_csv` (grid geometry is reconstructed)."""
    if isinstance(path_or_buf, (str, bytes)):
        with open(path_or_buf, "r", encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = path_or_buf.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != "t,x,v":
        raise ValueError("expected header 't,x,v'")
    data = np.array([[float(c) for c in ln.split(",")] for ln in lines[1:]])
    ts = np.unique(data[:, 0])
    xs = np.unique(data[:, 1])
    n_t, n_x = len(ts), len(xs)
    if n_t * n_x != data.shape[0]:
        raise ValueError("CSV is not a full time-space product grid")
    vals = data[:, 2].reshape(n_t, n_x)
    grid = Grid1D(float(xs[0]), float(xs[-1]), n_x)
    dt = float(ts[1] - ts[0]) if n_t > 1 else 1.0
    return ValueField(grid=grid, t0=float(ts[0]), dt=dt, values=vals,
                      provenance=provenance)
