"""Spatial indexes over point sets: a fixed uniform grid and an STR-packed
R-tree. Both answer bbox queries with the exact set of contained points;
callers refine candidates with their own geometric predicates."""

from __future__ import annotations

import math

import numpy as np

from ..core import EARTH_RADIUS_M

_MDEG = EARTH_RADIUS_M * math.pi / 180.0  # meters per degree of great-circle arc


def expand_bbox_by_radius(bbox: tuple[float, float, float, float],
                          radius_m: float) -> tuple[float, float, float, float]:
    """Conservative degree-space bbox containing every point within radius_m
    (haversine) of the input box. 0.1% slack absorbs linearization error."""
    lon0, lat0, lon1, lat1 = bbox
    dlat = radius_m / _MDEG * 1.001
    max_abs_lat = min(89.9, max(abs(lat0), abs(lat1)) + dlat)
    dlon = radius_m / (_MDEG * math.cos(math.radians(max_abs_lat))) * 1.001
    return lon0 - dlon, lat0 - dlat, lon1 + dlon, lat1 + dlat


class GridIndex:
    """64x64 uniform cell grid over the data bbox with per-cell point lists."""

    CELLS = 64

    def __init__(self, lon: np.ndarray, lat: np.ndarray):
        n = len(lon)
        self.lon = lon
        self.lat = lat
        self.lon0 = float(lon.min()) if n else 0.0
        self.lat0 = float(lat.min()) if n else 0.0
        self.dx = max((float(lon.max()) - self.lon0) / self.CELLS, 1e-12) if n else 1.0
        self.dy = max((float(lat.max()) - self.lat0) / self.CELLS, 1e-12) if n else 1.0
        if n:
            ix = np.clip(((lon - self.lon0) / self.dx).astype(np.int64), 0, self.CELLS - 1)
            iy = np.clip(((lat - self.lat0) / self.dy).astype(np.int64), 0, self.CELLS - 1)
            cells = ix * self.CELLS + iy
            self.order = np.argsort(cells, kind="stable")
            counts = np.bincount(cells, minlength=self.CELLS * self.CELLS)
        else:
            self.order = np.empty(0, dtype=np.int64)
            counts = np.zeros(self.CELLS * self.CELLS, dtype=np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(counts)])

    def _cell_of(self, v: float, v0: float, dv: float) -> int:
        return int(np.clip(math.floor((v - v0) / dv), 0, self.CELLS - 1))

    def query_bbox(self, lon0: float, lat0: float, lon1: float, lat1: float) -> np.ndarray:
        """Indices of points with lon0<=lon<=lon1 and lat0<=lat<=lat1."""
        if len(self.lon) == 0 or lon1 < self.lon0 or lat1 < self.lat0:
            return np.empty(0, dtype=np.int64)
        ix0 = self._cell_of(lon0, self.lon0, self.dx)
        ix1 = self._cell_of(lon1, self.lon0, self.dx)
        iy0 = self._cell_of(lat0, self.lat0, self.dy)
        iy1 = self._cell_of(lat1, self.lat0, self.dy)
        chunks = []
        for ix in range(ix0, ix1 + 1):
            a = self.offsets[ix * self.CELLS + iy0]
            b = self.offsets[ix * self.CELLS + iy1 + 1]
            if b > a:
                chunks.append(self.order[a:b])
        if not chunks:
            return np.empty(0, dtype=np.int64)
        cand = np.concatenate(chunks)
        m = ((self.lon[cand] >= lon0) & (self.lon[cand] <= lon1)
             & (self.lat[cand] >= lat0) & (self.lat[cand] <= lat1))
        return cand[m]


class _Level:
    """One R-tree level: node bboxes plus CSR child pointers into the level
    below (for the leaf level, into capacity-sized runs of the point
    permutation)."""

    __slots__ = ("bbox", "child", "offsets")

    def __init__(self, bbox: np.ndarray, child: np.ndarray, offsets: np.ndarray):
        self.bbox = bbox
        self.child = child
        self.offsets = offsets

    def __len__(self) -> int:
        return len(self.bbox)


class STRTree:
    """Sort-Tile-Recursive bulk-loaded R-tree over points (node capacity 16)."""

    def __init__(self, lon: np.ndarray, lat: np.ndarray, capacity: int = 16):
        if capacity < 2:
            raise ValueError("node capacity must be >= 2")
        self.lon = lon
        self.lat = lat
        self.capacity = capacity
        self.levels: list[_Level] = []
        n = len(lon)
        if n == 0:
            self.perm = np.empty(0, dtype=np.int64)
            return
        self.perm = self._str_order(lon, lat)
        # leaf level: node i covers perm[i*capacity:(i+1)*capacity]
        m = math.ceil(n / capacity)
        bbox = np.empty((m, 4))
        for i in range(m):
            sl = self.perm[i * capacity:(i + 1) * capacity]
            bbox[i] = (lon[sl].min(), lat[sl].min(), lon[sl].max(), lat[sl].max())
        self.levels.append(_Level(bbox, np.arange(m, dtype=np.int64),
                                  np.arange(m + 1, dtype=np.int64)))
        while len(self.levels[-1]) > 1:
            below = self.levels[-1].bbox
            order = self._str_order((below[:, 0] + below[:, 2]) / 2,
                                    (below[:, 1] + below[:, 3]) / 2)
            m = math.ceil(len(below) / capacity)
            bbox = np.empty((m, 4))
            offsets = np.minimum(np.arange(m + 1) * capacity, len(below))
            for i in range(m):
                ch = order[offsets[i]:offsets[i + 1]]
                bbox[i] = (below[ch, 0].min(), below[ch, 1].min(),
                           below[ch, 2].max(), below[ch, 3].max())
            self.levels.append(_Level(bbox, order, offsets))

    def _str_order(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """STR ordering: vertical slabs by x, each slab ordered by y."""
        n = len(x)
        n_nodes = math.ceil(n / self.capacity)
        n_slabs = math.ceil(math.sqrt(n_nodes))
        slab_size = math.ceil(n / n_slabs) if n_slabs else n
        by_x = np.argsort(x, kind="stable")
        out = np.empty(n, dtype=np.int64)
        for s in range(0, n, slab_size):
            slab = by_x[s:s + slab_size]
            out[s:s + len(slab)] = slab[np.argsort(y[slab], kind="stable")]
        return out

    @property
    def height(self) -> int:
        return len(self.levels)

    def query_bbox(self, lon0: float, lat0: float, lon1: float, lat1: float) -> np.ndarray:
        if not self.levels:
            return np.empty(0, dtype=np.int64)
        hits: list[np.ndarray] = []
        top = len(self.levels) - 1
        stack = [(top, i) for i in range(len(self.levels[top]))]
        while stack:
            level_i, node = stack.pop()
            level = self.levels[level_i]
            b = level.bbox[node]
            if b[0] > lon1 or b[2] < lon0 or b[1] > lat1 or b[3] < lat0:
                continue
            if level_i == 0:
                sl = self.perm[node * self.capacity:(node + 1) * self.capacity]
                m = ((self.lon[sl] >= lon0) & (self.lon[sl] <= lon1)
                     & (self.lat[sl] >= lat0) & (self.lat[sl] <= lat1))
                if m.any():
                    hits.append(sl[m])
            else:
                children = level.child[level.offsets[node]:level.offsets[node + 1]]
                stack.extend((level_i - 1, int(c)) for c in children)
        if not hits:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(hits)
