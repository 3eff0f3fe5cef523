"""Tile-level floor plan of factories, output ports and data qubits.

Coordinates are ``(x, y)`` logical tiles with ``0 <= x < width`` and
``0 <= y < height``. Factory regions are black boxes: braids may start at a
port on a region's boundary but never cross a region.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from msfactory.exceptions import DoesNotFit
from msfactory.utils.validation import check_positive_int

PLACEMENTS = ("central", "mesh")


@dataclass(frozen=True)
class Region:
    """Axis-aligned rectangle of tiles with top-left corner ``(x, y)``."""

    x: int
    y: int
    w: int
    h: int

    def contains(self, tile):
        tx, ty = tile
        return self.x <= tx < self.x + self.w and self.y <= ty < self.y + self.h

    def overlaps(self, other, gap=0):
        return not (
            self.x + self.w + gap <= other.x
            or other.x + other.w + gap <= self.x
            or self.y + self.h + gap <= other.y
            or other.y + other.h + gap <= self.y
        )

    def ring(self):
        """Boundary tiles without the four corners, clockwise from the top edge."""
        x0, y0, x1, y1 = self.x, self.y, self.x + self.w - 1, self.y + self.h - 1
        top = [(x, y0) for x in range(x0 + 1, x1)]
        right = [(x1, y) for y in range(y0 + 1, y1)]
        bottom = [(x, y1) for x in range(x1 - 1, x0, -1)]
        left = [(x0, y) for y in range(y1 - 1, y0, -1)]
        return top + right + bottom + left


@dataclass(frozen=True)
class LatticeLayout:
    """Placement of factories, their output ports and the data qubits.

    Attributes:
        width, height: Lattice size in logical tiles.
        factory_regions: One :class:`Region` per factory.
        output_ports: Port tiles as ``(x, y)``, grouped factory by factory.
        port_factory: Factory index of each entry in ``output_ports``.
        data_tiles: Tiles hosting logical data qubits.
    """

    width: int
    height: int
    factory_regions: tuple
    output_ports: tuple
    port_factory: tuple
    data_tiles: tuple

    def blocked_mask(self):
        """Boolean ``(height, width)`` array, True on factory tiles."""
        mask = np.zeros((self.height, self.width), dtype=bool)
        for reg in self.factory_regions:
            mask[reg.y:reg.y + reg.h, reg.x:reg.x + reg.w] = True
        return mask

    @property
    def ports_per_factory(self):
        return len(self.output_ports) // max(1, len(self.factory_regions))


def factory_footprint(arch):
    """Logical tiles of one factory: its first-round block-code layout."""
    k = arch.k
    return math.ceil((3 * k + 8) ** (arch.levels - 1) * (6 * k + 14) - 1e-9)


def _region_shape(tiles):
    w = math.ceil(math.sqrt(tiles))
    return w, math.ceil(tiles / w)


def _ports_per_factory(arch):
    m = arch.K // arch.X
    if m * arch.X != arch.K:
        raise ValueError(f"simulated factories need an integer K/X, got K={arch.K}, X={arch.X}")
    return m


def _place_regions(X, w, h, width, height, placement):
    cols = math.ceil(math.sqrt(X))
    rows = math.ceil(X / cols)
    regions = []
    if placement == "central":
        block_w = cols * w + (cols - 1)
        block_h = rows * h + (rows - 1)
        ox, oy = (width - block_w) // 2, (height - block_h) // 2
        for i in range(X):
            r, c = divmod(i, cols)
            regions.append(Region(ox + c * (w + 1), oy + r * (h + 1), w, h))
    else:
        for i in range(X):
            r, c = divmod(i, cols)
            cx = (2 * c + 1) * width / (2 * cols)
            cy = (2 * r + 1) * height / (2 * rows)
            regions.append(Region(int(math.floor(cx - w / 2)), int(math.floor(cy - h / 2)), w, h))
    for reg in regions:
        # keep one free tile between every region and the lattice edge so
        # each port has a routable neighbour
        if reg.x < 1 or reg.y < 1 or reg.x + reg.w > width - 1 or reg.y + reg.h > height - 1:
            raise DoesNotFit(f"{X} factories of {w}x{h} tiles do not fit a {width}x{height} lattice")
    for i, a in enumerate(regions):
        for b in regions[i + 1:]:
            if a.overlaps(b, gap=1):
                raise DoesNotFit(f"{X} factories of {w}x{h} tiles overlap on a {width}x{height} lattice")
    return regions


def _data_candidates(width, height, regions):
    """Odd-odd tiles not touching a factory; even rows and columns stay free as channels."""
    moat = np.zeros((height, width), dtype=bool)
    for reg in regions:
        moat[max(reg.y - 1, 0):reg.y + reg.h + 1, max(reg.x - 1, 0):reg.x + reg.w + 1] = True
    return [
        (x, y)
        for y in range(1, height - 1, 2)
        for x in range(1, width - 1, 2)
        if not moat[y, x]
    ]


def _build(arch, n_data_qubits, placement, width, height):
    w, h = _region_shape(factory_footprint(arch))
    regions = _place_regions(arch.X, w, h, width, height, placement)
    m = _ports_per_factory(arch)
    ports, owner = [], []
    for f, reg in enumerate(regions):
        ring = reg.ring()
        if m > len(ring):
            raise DoesNotFit(f"{m} ports do not fit on the {len(ring)}-tile boundary of a {w}x{h} factory")
        ports.extend(ring[(j * len(ring)) // m] for j in range(m))
        owner.extend([f] * m)
    cand = _data_candidates(width, height, regions)
    if len(cand) < n_data_qubits:
        raise DoesNotFit(
            f"{n_data_qubits} data qubits need more than the {len(cand)} free slots"
            f" of a {width}x{height} lattice"
        )
    data = [cand[(i * len(cand)) // n_data_qubits] for i in range(n_data_qubits)]
    return LatticeLayout(width, height, tuple(regions), tuple(ports), tuple(owner), tuple(data))


def build_layout(arch, n_data_qubits, placement="central", width=None, height=None):
    """Deterministic floor plan for ``arch`` with ``n_data_qubits`` data tiles.

    Each factory is a near-square region sized by its first-round logical
    qubit count. ``central`` packs all factories around the lattice centre;
    ``mesh`` spreads them over a uniform grid of cells. Every factory exposes
    ``K/X`` ports spread evenly around its boundary. Data qubits sit on
    odd-odd tiles spread evenly in row-major order, so the even rows and
    columns form routing channels.

    When ``width``/``height`` are omitted the smallest square lattice that
    fits is used.

    Raises:
        DoesNotFit: factories, ports or data qubits exceed the lattice.
    """
    if placement not in PLACEMENTS:
        raise ValueError(f"placement must be one of {PLACEMENTS}, got {placement!r}")
    n_data_qubits = check_positive_int(n_data_qubits, "n_data_qubits")
    if width is not None or height is not None:
        width = check_positive_int(width if width is not None else height, "width")
        height = check_positive_int(height if height is not None else width, "height")
        return _build(arch, n_data_qubits, placement, width, height)
    w, h = _region_shape(factory_footprint(arch))
    ring = 2 * (w - 2) + 2 * (h - 2)
    if _ports_per_factory(arch) > ring:
        # growing the lattice cannot help a too-small factory boundary
        raise DoesNotFit(f"{_ports_per_factory(arch)} ports do not fit on the {ring}-tile boundary"
                         f" of a {w}x{h} factory")
    side = math.ceil(math.sqrt(arch.X * factory_footprint(arch) + 4 * n_data_qubits)) + 2
    while True:
        try:
            return _build(arch, n_data_qubits, placement, side, side)
        except DoesNotFit:
            if side > 4096:
                raise
            side += 1
