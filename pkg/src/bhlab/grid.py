r"""Uniform periodic grids and spectrally accurate operations on them.

A :class:`Field` is a real function sampled at ``x_k = x_min + k h``,
``k = 0..n-1``, with ``h = (x_max - x_min)/n``. Spectral operations treat
it as one period of a periodic function, so the data must be (numerically)
periodic at the box edges, which in practice means compactly supported well
inside the box.

Derivatives use the multiplier :math:`(ik)^m` on the real FFT. The Nyquist
mode carries no derivative information and is dropped by every derivative;
it is kept only for order-zero interpolation, so that interpolating at a
grid node returns the stored sample.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NonFiniteInput, OrderOutOfRange, PointOutsideGrid

MAX_ORDER = 9


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on ``[x_min, x_max)`` with ``n_points`` samples."""

    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        n = int(self.n_points)
        if n < 16 or n & (n - 1):
            raise ValueError(f"n_points must be a power of two >= 16, got {n}")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")
        object.__setattr__(self, "n_points", n)
        object.__setattr__(self, "x_min", float(self.x_min))
        object.__setattr__(self, "x_max", float(self.x_max))

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def spacing(self) -> float:
        return self.length / self.n_points

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.spacing * np.arange(self.n_points)

    @property
    def k(self) -> np.ndarray:
        """Angular wavenumbers of the real FFT, ``0 .. pi/h``."""
        return 2.0 * np.pi / self.length * np.arange(self.n_points // 2 + 1)

    @property
    def dealias_cutoff(self) -> int:
        """Largest retained mode index under the 2/3 rule."""
        return (self.n_points - 1) // 3

    def dealias_mask(self) -> np.ndarray:
        return np.arange(self.n_points // 2 + 1) <= self.dealias_cutoff

    def contains(self, x0: float) -> bool:
        return self.x_min <= x0 <= self.x_max

    @classmethod
    def symmetric(cls, half_width: float, n_points: int) -> "Grid1D":
        return cls(-half_width, half_width, n_points)


@dataclass(frozen=True)
class Field:
    """Samples of a real function on a :class:`Grid1D`.

    ``time`` is physical time ``t`` or self-similar time ``s`` depending on
    what the field holds; ``label`` is free text.
    """

    grid: Grid1D
    values: np.ndarray
    label: str = ""
    time: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_points,):
            raise ValueError(f"expected {self.grid.n_points} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise NonFiniteInput(f"field '{self.label}' has non-finite samples")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def with_values(self, values, label=None, time=None) -> "Field":
        return Field(self.grid, values, self.label if label is None else label,
                     self.time if time is None else time)

    def hat(self) -> np.ndarray:
        return np.fft.rfft(self.values)

    def l2_norm(self) -> float:
        return float(np.sqrt(self.grid.spacing * np.sum(self.values ** 2)))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __add__(self, other):
        return self.with_values(self.values + _vals(other))

    def __sub__(self, other):
        return self.with_values(self.values - _vals(other))

    def __mul__(self, other):
        return self.with_values(self.values * _vals(other))

    __rmul__ = __mul__


def _vals(other):
    return other.values if isinstance(other, Field) else other


def sample(grid: Grid1D, func, label="", time=0.0) -> Field:
    """Field with values ``func(grid.x)``."""
    return Field(grid, func(grid.x), label, time)


def _check_order(order, lo=0):
    if not (lo <= int(order) <= MAX_ORDER):
        raise OrderOutOfRange(f"order must lie in {lo}..{MAX_ORDER}, got {order}")


def derivative_multiplier(grid: Grid1D, order: int) -> np.ndarray:
    """``(ik)^order`` on the rfft modes, Nyquist mode zeroed for order >= 1."""
    mult = (1j * grid.k) ** order
    if order > 0:
        mult[-1] = 0.0
    return mult


def spectral_derivative(f: Field, order: int) -> Field:
    """``order``-th derivative of a periodic field via the Fourier multiplier."""
    _check_order(order, lo=1)
    if not np.all(np.isfinite(f.values)):
        raise NonFiniteInput("non-finite input to spectral_derivative")
    fh = np.fft.rfft(f.values) * derivative_multiplier(f.grid, order)
    return f.with_values(np.fft.irfft(fh, f.grid.n_points))


def dealias(f: Field) -> Field:
    """Zero the upper third of the Fourier modes (2/3 rule)."""
    fh = np.fft.rfft(f.values)
    fh[~f.grid.dealias_mask()] = 0.0
    return f.with_values(np.fft.irfft(fh, f.grid.n_points))


def jet_from_hat(fh: np.ndarray, grid: Grid1D, x0: float, max_order: int,
                 orders=None) -> np.ndarray:
    """Derivatives at ``x0`` from the rfft coefficients ``fh``.

    Evaluates the trigonometric interpolant and its derivatives in O(n) per
    order. ``orders`` restricts the computation to a subset of orders (the
    result still has length ``max_order + 1``; skipped entries are NaN).
    """
    n = grid.n_points
    k = grid.k
    w = np.full(k.shape, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    c = w * fh * np.exp(1j * k * (x0 - grid.x_min)) / n
    out = np.full(max_order + 1, np.nan)
    ik = 1j * k
    wanted = range(max_order + 1) if orders is None else orders
    for m in wanted:
        if m == 0:
            out[0] = np.sum(c).real
        else:
            # Nyquist dropped, consistent with spectral_derivative
            out[m] = np.sum(c[:-1] * ik[:-1] ** m).real
    return out


def local_jet(f: Field, x0: float, max_order: int) -> np.ndarray:
    """``(f(x0), f'(x0), ..., f^{(max_order)}(x0))`` by Fourier interpolation."""
    _check_order(max_order)
    if not f.grid.contains(x0):
        raise PointOutsideGrid(f"x0={x0} outside [{f.grid.x_min}, {f.grid.x_max}]")
    return jet_from_hat(np.fft.rfft(f.values), f.grid, x0, max_order)


def fourier_eval_orders(fh: np.ndarray, grid: Grid1D, points, orders,
                        chunk: int = 64) -> np.ndarray:
    """Derivatives of the interpolant at many points, one row per entry of ``orders``.

    The exponential matrix is shared by all orders, and trailing coefficients
    that are exactly zero (e.g. after a jet filter) are skipped.
    """
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    if pts.size and (pts.min() < grid.x_min or pts.max() > grid.x_max):
        raise PointOutsideGrid("evaluation points outside the grid")
    orders = list(orders)
    k = grid.k
    w = np.full(k.shape, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    coef = []
    for order in orders:
        c = w * fh * derivative_multiplier(grid, order) / grid.n_points
        if order == 0:
            c[-1] = fh[-1] / grid.n_points
        coef.append(c)
    C = np.array(coef, dtype=complex).reshape(len(orders), k.size)
    nz = np.flatnonzero(np.any(C != 0, axis=0))
    m = nz[-1] + 1 if nz.size else 1
    C, km = C[:, :m], k[:m]
    out = np.empty((len(orders), pts.size))
    for lo in range(0, pts.size, chunk):
        theta = pts[lo:lo + chunk, None] - grid.x_min
        out[:, lo:lo + chunk] = (C @ np.exp(1j * theta * km[None, :]).T).real
    return out


def fourier_eval(fh: np.ndarray, grid: Grid1D, points, order: int = 0,
                 chunk: int = 64) -> np.ndarray:
    """Evaluate the ``order``-th derivative of the interpolant at many points."""
    return fourier_eval_orders(fh, grid, points, [order], chunk)[0]


def support_radius(f: Field, center: float = 0.0, rel_tol: float = 0.0) -> float:
    """Largest ``|x - center|`` at which ``|f| > rel_tol * max|f|``."""
    v = np.abs(f.values)
    if v.max() == 0.0:
        return 0.0
    idx = np.nonzero(v > rel_tol * v.max())[0]
    return float(np.max(np.abs(f.x[idx] - center)))


def write_field_csv(path, f: Field) -> None:
    """CSV with a metadata comment line followed by ``x,value`` rows."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# x_min={f.grid.x_min!r} x_max={f.grid.x_max!r} "
                 f"n_points={f.grid.n_points} time={f.time!r} label={f.label}\n")
        w = csv.writer(fh)
        w.writerow(["x", "value"])
        for xi, vi in zip(f.x, f.values):
            w.writerow([repr(float(xi)), repr(float(vi))])


def read_field_csv(path) -> Field:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().lstrip("#").strip()
        meta = {}
        label = ""
        if " label=" in header:
            header, label = header.split(" label=", 1)
        for tok in header.split():
            key, val = tok.split("=", 1)
            meta[key] = val
        rows = list(csv.reader(fh))[1:]
    grid = Grid1D(float(meta["x_min"]), float(meta["x_max"]), int(meta["n_points"]))
    values = np.array([float(r[1]) for r in rows])
    return Field(grid, values, label, float(meta.get("time", 0.0)))
