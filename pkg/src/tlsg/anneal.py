"""Exact state-vector simulation of Rydberg annealing on small layouts.

Units: time in microseconds, lengths in micrometres, angular frequencies in
rad/us (so ``2*pi*4`` is a 4 MHz Rabi frequency).

Basis convention: atom ``v`` is bit ``v`` of the basis index (little endian).
"""

from __future__ import annotations

import csv
import math
import os
import tempfile
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .lattice import GridLayout, LatticeFamily, derive_edges

TWO_PI = 2.0 * math.pi
C6_DEFAULT = TWO_PI * 862690.0
OMEGA_MAX_DEFAULT = TWO_PI * 4.0
DELTA_RATIO_DEFAULT = 5.0
MAX_ATOMS = 18

# fourth-order Yoshida weights for a symmetric second-order step
_Y1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_Y0 = 1.0 - 2.0 * _Y1


class SimulationSizeError(ValueError):
    """Too many atoms for a dense state vector."""


def blockade_radius(omega_max: float = OMEGA_MAX_DEFAULT, c6: float = C6_DEFAULT) -> float:
    return (c6 / omega_max) ** (1.0 / 6.0)


def lattice_spacing(family: LatticeFamily, r_b: float) -> float:
    """Spacing putting ``R_b`` at the geometric mean of ``r_max`` and ``R_min``."""
    return r_b / math.sqrt(family.R_min * family.r_max)


def _interp(points: Sequence[tuple[float, float]], t: float) -> float:
    ts = [p[0] for p in points]
    vs = [p[1] for p in points]
    return float(np.interp(t, ts, vs))


@dataclass
class PulseSchedule:
    """Piecewise-linear Rabi and detuning profiles.

    Breakpoints are given as fractions of ``T`` (``omega_shape`` values in
    units of ``omega_max``, ``delta_shape`` in units of ``delta_max``). The
    defaults are a trapezoidal Rabi ramp with a linear detuning sweep in its
    plateau, digitized approximately.
    """

    T: float
    omega_max: float = OMEGA_MAX_DEFAULT
    delta_max: float = DELTA_RATIO_DEFAULT * OMEGA_MAX_DEFAULT
    omega_shape: tuple = ((0.0, 0.0), (0.1, 1.0), (0.9, 1.0), (1.0, 0.0))
    delta_shape: tuple = ((0.0, -1.0), (0.1, -1.0), (0.9, 1.0), (1.0, 1.0))

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("total time must be positive")
        for shape in (self.omega_shape, self.delta_shape):
            xs = [p[0] for p in shape]
            if xs[0] != 0.0 or xs[-1] != 1.0 or any(b < a for a, b in zip(xs, xs[1:])):
                raise ValueError("breakpoints must run from 0 to 1 in order")
        if self.omega_shape[0][1] != 0.0 or self.omega_shape[-1][1] != 0.0:
            raise ValueError("Rabi frequency must vanish at both ends")

    def omega_points(self) -> list[tuple[float, float]]:
        return [(f * self.T, v * self.omega_max) for f, v in self.omega_shape]

    def delta_points(self) -> list[tuple[float, float]]:
        return [(f * self.T, v * self.delta_max) for f, v in self.delta_shape]

    def omega(self, t: float) -> float:
        return _interp(self.omega_points(), t)

    def delta(self, t: float) -> float:
        return _interp(self.delta_points(), t)

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "omega_max": self.omega_max,
            "delta_max": self.delta_max,
            "omega": [list(p) for p in self.omega_points()],
            "delta": [list(p) for p in self.delta_points()],
        }


@dataclass
class RydbergInstance:
    """Atom positions (um) with relative detuning weights."""

    positions: np.ndarray
    weights: np.ndarray
    c6: float = C6_DEFAULT
    spacing: float | None = None
    r_b: float | None = None
    edges: list = field(default_factory=list)
    family: str = ""

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.weights) != len(self.positions):
            raise ValueError("positions and weights differ in length")

    @property
    def n(self) -> int:
        return len(self.positions)

    @classmethod
    def from_layout(
        cls,
        layout: GridLayout,
        omega_max: float = OMEGA_MAX_DEFAULT,
        c6: float = C6_DEFAULT,
        weight_norm: float = 2.0,
    ) -> "RydbergInstance":
        """Place a layout at the blockade-matched spacing.

        Relative detunings are ``weight / weight_norm``; the default treats
        ``2`` (a wire-interior weight with unit delta) as the reference.
        """
        if omega_max <= 0:
            raise ValueError("omega_max sets the blockade radius and must be positive")
        r_b = blockade_radius(omega_max, c6)
        a = lattice_spacing(layout.family, r_b)
        return cls(
            layout.physical(a),
            np.asarray(layout.weights, dtype=float) / weight_norm,
            c6,
            a,
            r_b,
            derive_edges(layout),
            layout.family.name,
        )

    def interactions(self) -> np.ndarray:
        """Full ``C6 / r**6`` matrix, zero on the diagonal."""
        d = self.positions[:, None, :] - self.positions[None, :, :]
        r2 = (d**2).sum(-1)
        np.fill_diagonal(r2, np.inf)
        return self.c6 / r2**3


def _check_size(n: int) -> None:
    if n > MAX_ATOMS:
        raise SimulationSizeError(f"{n} atoms exceeds the dense cap of {MAX_ATOMS}")
    if n < 1:
        raise SimulationSizeError("need at least one atom")


def occupation_table(n: int) -> np.ndarray:
    """``(2**n, n)`` array of basis-state bits."""
    idx = np.arange(2**n, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n)) & 1).astype(np.int8)


@dataclass
class Hamiltonian:
    """Matrix-free ``H = sum (omega/2) X_v - sum delta_v n_v + sum V_uv n_u n_v``."""

    n: int
    omega: float
    diag: np.ndarray

    def apply(self, psi: np.ndarray) -> np.ndarray:
        out = self.diag * psi
        if self.omega != 0.0:
            half = 0.5 * self.omega
            idx = np.arange(psi.size)
            for v in range(self.n):
                out += half * psi[idx ^ (1 << v)]
        return out

    def to_sparse(self):
        from scipy import sparse

        dim = 2**self.n
        idx = np.arange(dim)
        rows = [idx]
        cols = [idx]
        vals = [self.diag.astype(complex)]
        if self.omega != 0.0:
            for v in range(self.n):
                rows.append(idx)
                cols.append(idx ^ (1 << v))
                vals.append(np.full(dim, 0.5 * self.omega, dtype=complex))
        return sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
        )

    def energy(self, psi: np.ndarray) -> float:
        return float(np.real(np.vdot(psi, self.apply(psi))))


class _DiagonalParts:
    """Precomputed interaction energies and weighted occupations per basis state."""

    def __init__(self, inst: RydbergInstance):
        _check_size(inst.n)
        occ = occupation_table(inst.n).astype(float)
        V = inst.interactions()
        self.interaction = 0.5 * np.einsum("bi,ij,bj->b", occ, V, occ)
        self.weighted = occ @ inst.weights

    def diag(self, delta: float) -> np.ndarray:
        return self.interaction - delta * self.weighted


def build_hamiltonian(inst: RydbergInstance, omega: float, delta: float) -> Hamiltonian:
    """Hamiltonian with global detuning ``delta`` scaled per atom by its weight."""
    parts = _DiagonalParts(inst)
    return Hamiltonian(inst.n, float(omega), parts.diag(delta))


def _x_rotation(psi: np.ndarray, n: int, theta: float) -> np.ndarray:
    """Apply ``exp(-i theta X)`` to every atom."""
    c, s = math.cos(theta), -1j * math.sin(theta)
    idx = np.arange(psi.size)
    for v in range(n):
        psi = c * psi + s * psi[idx ^ (1 << v)]
    return psi


def _strang(psi, n, diag, omega, h):
    psi = psi * np.exp(-0.5j * h * diag)
    psi = _x_rotation(psi, n, 0.5 * omega * h)
    return psi * np.exp(-0.5j * h * diag)


def step(psi: np.ndarray, n: int, diag: np.ndarray, omega: float, h: float) -> np.ndarray:
    """One fourth-order step of length ``h`` under a constant Hamiltonian."""
    psi = _strang(psi, n, diag, omega, _Y1 * h)
    psi = _strang(psi, n, diag, omega, _Y0 * h)
    return _strang(psi, n, diag, omega, _Y1 * h)


def default_dt(omega_max: float = OMEGA_MAX_DEFAULT) -> float:
    # without driving the evolution is diagonal and one step is exact
    return 0.1 / omega_max if omega_max > 0 else math.inf


def evolve(
    inst: RydbergInstance,
    schedule: PulseSchedule,
    dt: float | None = None,
    substeps: int = 4,
    psi0: np.ndarray | None = None,
) -> np.ndarray:
    """Final state from ``|0...0>`` with coefficients sampled at step midpoints.

    Each step of length ``dt`` holds the Hamiltonian fixed and integrates it
    with ``substeps`` fourth-order splitting steps.
    """
    n = inst.n
    parts = _DiagonalParts(inst)
    bound = default_dt(schedule.omega_max)
    if dt is None:
        dt = bound
    if dt > bound * (1 + 1e-12):
        warnings.warn(f"time step {dt:g} exceeds 0.1/omega_max = {bound:g}", stacklevel=2)
    nsteps = max(1, int(math.ceil(schedule.T / dt - 1e-9)))
    h = schedule.T / nsteps
    if psi0 is None:
        psi = np.zeros(2**n, dtype=complex)
        psi[0] = 1.0
    else:
        psi = np.asarray(psi0, dtype=complex).copy()
    t_om = schedule.omega_points()
    t_de = schedule.delta_points()
    sub = h / substeps
    for k in range(nsteps):
        tm = (k + 0.5) * h
        om = _interp(t_om, tm)
        diag = parts.diag(_interp(t_de, tm))
        for _ in range(substeps):
            psi = step(psi, n, diag, om, sub)
    return psi


def evolve_reference(inst: RydbergInstance, schedule: PulseSchedule, dt: float | None = None) -> np.ndarray:
    """Same piecewise-constant evolution via sparse matrix exponentials."""
    from scipy.sparse.linalg import expm_multiply

    parts = _DiagonalParts(inst)
    dt = dt or default_dt(schedule.omega_max)
    nsteps = max(1, int(math.ceil(schedule.T / dt - 1e-9)))
    h = schedule.T / nsteps
    psi = np.zeros(2**inst.n, dtype=complex)
    psi[0] = 1.0
    for k in range(nsteps):
        tm = (k + 0.5) * h
        H = Hamiltonian(inst.n, schedule.omega(tm), parts.diag(schedule.delta(tm))).to_sparse()
        psi = expm_multiply(-1j * h * H, psi)
    return psi


def probabilities(psi: np.ndarray) -> np.ndarray:
    return np.abs(psi) ** 2


def violation_rate(edges: Sequence[tuple[int, int]], psi: np.ndarray) -> float:
    """Expected fraction of bonds with both ends excited."""
    if not edges:
        raise ValueError("need at least one edge")
    n = int(round(math.log2(psi.size)))
    p = probabilities(psi)
    idx = np.arange(psi.size)
    total = 0.0
    for u, v in edges:
        both = ((idx >> u) & 1) & ((idx >> v) & 1)
        total += float(p[both == 1].sum())
    return total / len(edges)


def sample_bitstrings(psi: np.ndarray, shots: int, seed: int | None = None) -> list[tuple[int, ...]]:
    if shots < 1:
        raise ValueError("shots must be >= 1")
    n = int(round(math.log2(psi.size)))
    p = probabilities(psi)
    p = p / p.sum()
    rng = np.random.default_rng(seed)
    draws = rng.choice(psi.size, size=shots, p=p)
    return [tuple(int((d >> v) & 1) for v in range(n)) for d in draws]


def sampled_violation_rate(
    edges: Sequence[tuple[int, int]], psi: np.ndarray, shots: int, seed: int | None = None
) -> float:
    samples = np.array(sample_bitstrings(psi, shots, seed), dtype=np.int8)
    hits = sum(int(np.sum(samples[:, u] & samples[:, v])) for u, v in edges)
    return hits / (shots * len(edges))


def most_likely(psi: np.ndarray) -> tuple[int, ...]:
    n = int(round(math.log2(psi.size)))
    i = int(np.argmax(probabilities(psi)))
    return tuple((i >> v) & 1 for v in range(n))


def final_ground_space(inst: RydbergInstance, schedule: PulseSchedule, tol: float = 1e-9) -> np.ndarray:
    """Basis indices minimizing ``H(T)``, which is diagonal since ``omega(T) = 0``."""
    d = _DiagonalParts(inst).diag(schedule.delta(schedule.T))
    return np.nonzero(d <= d.min() + tol * max(1.0, abs(d.min())))[0]


def ground_state_overlap(inst: RydbergInstance, schedule: PulseSchedule, psi: np.ndarray) -> float:
    return float(probabilities(psi)[final_ground_space(inst, schedule)].sum())


def ground_state(inst: RydbergInstance, omega: float, delta: float) -> tuple[float, np.ndarray]:
    """Lowest eigenpair at fixed coefficients."""
    H = build_hamiltonian(inst, omega, delta)
    if inst.n <= 10:
        vals, vecs = np.linalg.eigh(H.to_sparse().toarray())
        return float(vals[0]), vecs[:, 0]
    from scipy.sparse.linalg import eigsh

    vals, vecs = eigsh(H.to_sparse(), k=1, which="SA")
    return float(vals[0]), vecs[:, 0]


CSV_FIELDS = ["family", "N", "T_us", "p_v", "gs_overlap"]


def write_csv(path: str, rows: Sequence[dict], comment: str | None = None) -> None:
    """Atomically write run rows with :data:`CSV_FIELDS` columns.

    ``comment`` becomes a leading ``#`` line.
    """
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    with os.fdopen(fd, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow(r)
    os.replace(tmp, path)


def run_ladder(
    layout: GridLayout,
    times: Sequence[float],
    weight_norm: float = 2.0,
    dt: float | None = None,
    substeps: int = 4,
    shots: int = 0,
    seed: int | None = None,
    **pulse,
) -> list[dict]:
    """Anneal ``layout`` for each total time; returns CSV-ready rows.

    With ``shots > 0`` the violation rate is estimated from sampled
    bitstrings instead of read off the exact populations.
    """
    inst = RydbergInstance.from_layout(
        layout, omega_max=pulse.get("omega_max", OMEGA_MAX_DEFAULT), weight_norm=weight_norm
    )
    if not inst.edges:
        raise ValueError("layout has no edges")
    rows = []
    for T in times:
        sched = PulseSchedule(T, **pulse)
        psi = evolve(inst, sched, dt, substeps)
        rows.append({
            "family": inst.family,
            "N": inst.n,
            "T_us": T,
            "p_v": sampled_violation_rate(inst.edges, psi, shots, seed) if shots else violation_rate(inst.edges, psi),
            "gs_overlap": ground_state_overlap(inst, sched, psi),
        })
    return rows
