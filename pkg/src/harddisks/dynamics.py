"""Hard-disk configurations on the unit torus and the single-particle chain.

One step proposes moving a uniformly random disk to a uniformly random torus
position and accepts iff the new position is at distance >= 2r from every
other center.  Neighbor queries go through a uniform cell grid; a brute-force
check is kept as the test oracle.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .geometry import TorusPoint

MAX_INSERTION_ATTEMPTS = 20_000


@dataclass(frozen=True)
class ChainStats:
    steps: int
    accepted: int

    @property
    def rejected(self) -> int:
        return self.steps - self.accepted

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.steps if self.steps else 0.0


class Configuration:
    """An immutable snapshot of n non-overlapping disk centers.

    Enforces the hard-core constraint (pairwise torus distance >= 2r) and the
    small-radius regime 8r < 1/2 that the coupling geometry relies on.
    """

    __slots__ = ("n", "r", "centers")

    def __init__(self, centers, r: float, _validate: bool = True):
        centers = np.array(centers, dtype=float).reshape(-1, 2) % 1.0
        self.n = len(centers)
        self.r = float(r)
        self.centers = centers
        self.centers.setflags(write=False)
        if _validate:
            if self.n > 1 and not 8.0 * self.r < 0.5:
                raise ValueError("radius too large: the coupling geometry needs 8r < 1/2")
            if self.r <= 0:
                raise ValueError("radius must be positive")
            if not self.is_valid():
                raise ValueError("overlapping disks: pairwise distance < 2r")

    @property
    def rho(self) -> float:
        return self.n * math.pi * self.r * self.r

    def point(self, i: int) -> TorusPoint:
        return TorusPoint(self.centers[i, 0], self.centers[i, 1])

    def is_valid(self) -> bool:
        """Full O(n^2) pairwise audit of the hard-core constraint."""
        c = self.centers
        for i in range(1, self.n):
            d = c[:i] - c[i]
            d -= np.round(d)
            if np.any((d * d).sum(axis=1) < (2.0 * self.r) ** 2 - 1e-15):
                return False
        return True

    def replace(self, i: int, xy) -> "Configuration":
        centers = self.centers.copy()
        centers[i] = np.asarray(xy) % 1.0
        out = Configuration.__new__(Configuration)
        out.n = self.n
        out.r = self.r
        out.centers = centers
        centers.setflags(write=False)
        return out


def radius_for_density(n: int, rho: float) -> float:
    """Disk radius giving combined area rho on the unit torus."""
    return math.sqrt(rho / (math.pi * n))


def random_config(n: int, rho: float, seed) -> Configuration:
    """Random sequential insertion with rejection; restarts on a jammed prefix."""
    if not 0 < rho < 0.25:
        raise ValueError("density must lie in (0, 1/4)")
    r = radius_for_density(n, rho)
    rng = np.random.default_rng(seed)
    four_r2 = (2.0 * r) ** 2
    attempts = 0
    while attempts < MAX_INSERTION_ATTEMPTS:
        centers = np.empty((n, 2))
        k = 0
        while k < n and attempts < MAX_INSERTION_ATTEMPTS:
            attempts += 1
            p = rng.random(2)
            if k == 0:
                centers[k] = p
                k += 1
                continue
            d = centers[:k] - p
            d -= np.round(d)
            if np.all((d * d).sum(axis=1) >= four_r2):
                centers[k] = p
                k += 1
        if k == n:
            return Configuration(centers, r)
    raise RuntimeError(
        f"random insertion failed after {MAX_INSERTION_ATTEMPTS} attempts "
        f"(n={n}, rho={rho}); density too high for this initializer"
    )


def propose(config: Configuration, rng) -> tuple[int, TorusPoint]:
    """Uniform disk index and uniform torus position."""
    i = int(rng.integers(config.n))
    x, y = rng.random(2)
    return i, TorusPoint(x, y)


def move_allowed_bruteforce(config: Configuration, i: int, xy) -> bool:
    """O(n) oracle: is center i allowed to move to xy?"""
    d = config.centers - np.asarray(xy)
    d -= np.round(d)
    dist2 = (d * d).sum(axis=1)
    dist2[i] = np.inf  # the moved disk's own old position never blocks
    return bool(np.all(dist2 >= (2.0 * config.r) ** 2))


class CellGrid:
    """Uniform spatial hash over the torus with cell side >= 2r.

    Any blocker of a proposal lies in the 3x3 cell block around it, so a
    membership query touches O(1) candidates at the densities we run.
    """

    def __init__(self, config: Configuration):
        self.m = max(1, int(1.0 / (2.0 * config.r)))
        self.r = config.r
        self.cells: list[list[int]] = [[] for _ in range(self.m * self.m)]
        self.xs = config.centers[:, 0].tolist()
        self.ys = config.centers[:, 1].tolist()
        self.cell_of = [0] * config.n
        for i, (x, y) in enumerate(zip(self.xs, self.ys)):
            c = self._cell(x, y)
            self.cells[c].append(i)
            self.cell_of[i] = c

    def _cell(self, x: float, y: float) -> int:
        return (int(x * self.m) % self.m) * self.m + (int(y * self.m) % self.m)

    def allowed(self, i: int, x: float, y: float) -> bool:
        m = self.m
        cx, cy = int(x * m) % m, int(y * m) % m
        lim = 4.0 * self.r * self.r
        for dx in (-1, 0, 1):
            gx = ((cx + dx) % m) * m
            for dy in (-1, 0, 1):
                for j in self.cells[gx + (cy + dy) % m]:
                    if j == i:
                        continue
                    ex = self.xs[j] - x
                    ex -= round(ex)
                    ey = self.ys[j] - y
                    ey -= round(ey)
                    if ex * ex + ey * ey < lim:
                        return False
        return True

    def move(self, i: int, x: float, y: float) -> None:
        c = self._cell(x, y)
        old = self.cell_of[i]
        if c != old:
            self.cells[old].remove(i)
            self.cells[c].append(i)
            self.cell_of[i] = c
        self.xs[i] = x
        self.ys[i] = y


def step(config: Configuration, rng) -> tuple[Configuration, bool]:
    """One move attempt; returns (next configuration, accepted)."""
    i, p = propose(config, rng)
    if move_allowed_bruteforce(config, i, (p.x, p.y)):
        return config.replace(i, (p.x, p.y)), True
    return config, False


def run(config: Configuration, steps: int, seed, block: int = 65_536):
    """Run the chain for a number of steps; deterministic given the seed.

    Proposals are drawn in blocks and validity is checked through the cell
    grid, so long runs stay cheap.  Returns (final configuration, stats).
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    rng = np.random.default_rng(seed)
    if steps == 0:
        return config, ChainStats(steps=0, accepted=0)
    grid = CellGrid(config)
    n = config.n
    accepted = 0
    done = 0
    while done < steps:
        todo = min(block, steps - done)
        idx = rng.integers(n, size=todo)
        pts = rng.random((todo, 2))
        for k in range(todo):
            i = int(idx[k])
            x, y = pts[k]
            if grid.allowed(i, x, y):
                grid.move(i, x, y)
                accepted += 1
        done += todo
    centers = np.column_stack([grid.xs, grid.ys])
    final = Configuration(centers, config.r, _validate=False)
    return final, ChainStats(steps=steps, accepted=accepted)


def save_snapshot(config: Configuration, path, seed=None) -> None:
    """CSV of centers plus a JSON sidecar with n, r, rho, seed."""
    with open(path, "w") as fh:
        fh.write("x,y\n")
        for x, y in config.centers:
            fh.write(f"{x:.12g},{y:.12g}\n")
    sidecar = {"n": config.n, "r": float(f"{config.r:.12g}"),
               "rho": float(f"{config.rho:.12g}"), "seed": seed}
    with open(str(path) + ".json", "w") as fh:
        json.dump(sidecar, fh)


def load_snapshot(path) -> Configuration:
    with open(str(path) + ".json") as fh:
        sidecar = json.load(fh)
    centers = np.loadtxt(path, delimiter=",", skiprows=1).reshape(-1, 2)
    return Configuration(centers, sidecar["r"])
