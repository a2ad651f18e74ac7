"""
Particle geometry for the elastomer and the indenters
- Regular elastomer lattice with surface / bottom-layer bookkeeping
- ASCII PLY and XYZ point clouds (millimeters on disk, meters in memory)
- Seeded subsampling and rigid placement of indenter clouds
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from core.errors import EmptyCloud, ParseError
from core.mpm_solver import MaterialTag

logger = logging.getLogger(__name__)

# point-cloud files are in millimeters
FILE_UNIT = 1e-3


@dataclass
class ParticleSet:
    """Positions (meters) of one body plus provenance and lattice metadata"""

    positions: np.ndarray
    tag: MaterialTag
    source: str
    tags: Optional[np.ndarray] = None
    lattice_counts: Optional[tuple] = None
    dims: Optional[np.ndarray] = None
    surface_index: Optional[np.ndarray] = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(self.positions)):
            raise ValueError(f"Particle set '{self.source}' has non-finite coordinates")

    def __len__(self):
        return int(self.positions.shape[0])

    @property
    def bounding_box(self):
        return self.positions.min(axis=0), self.positions.max(axis=0)

    @property
    def volume(self):
        """Lattice volume for lattices, bounding-box volume otherwise"""
        if self.dims is not None:
            return float(np.prod(self.dims))
        lo, hi = self.bounding_box
        return float(np.prod(hi - lo))

    def tag_array(self):
        if self.tags is not None:
            return self.tags
        return np.full(len(self), int(self.tag), dtype=np.int8)


@dataclass(frozen=True)
class Pose:
    """Rotation about z (radians) through the origin, then translation (meters)"""

    translation: tuple = (0.0, 0.0, 0.0)
    yaw: float = 0.0

    def rotation(self):
        c, s = np.cos(self.yaw), np.sin(self.yaw)
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass
class IndenterSpec:
    """Which cloud to load, how many points to keep, where to put it"""

    cloud_path: str = ""
    target_count: int = 100000
    pose: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    yaw: float = 0.0
    seed: int = 0
    gap: float = 1e-4

    def to_pose(self, offset=(0.0, 0.0)):
        x, y, z = self.pose
        return Pose(translation=(x + offset[0], y + offset[1], z), yaw=self.yaw)

    def validate(self):
        errors = []
        if int(self.target_count) < 1:
            errors.append(f"indenter target_count must be >= 1 (got {self.target_count})")
        if len(self.pose) != 3:
            errors.append(f"indenter pose must have 3 components (got {self.pose})")
        if self.gap < 0:
            errors.append(f"indenter gap must be >= 0 (got {self.gap})")
        return errors

    @classmethod
    def from_dict(cls, data):
        return cls(
            cloud_path=str(data.get("cloud_path", "")),
            target_count=int(data.get("target_count", 100000)),
            pose=[float(v) for v in data.get("pose", [0.0, 0.0, 0.0])],
            yaw=float(data.get("yaw", 0.0)),
            seed=int(data.get("seed", 0)),
            gap=float(data.get("gap", 1e-4)),
        )

    def to_dict(self):
        return {
            "cloud_path": self.cloud_path,
            "target_count": int(self.target_count),
            "pose": list(self.pose),
            "yaw": self.yaw,
            "seed": int(self.seed),
            "gap": self.gap,
        }


def make_elastomer_lattice(dims, counts, n_fixed=2, origin=None):
    """
    Regular lattice spanning dims

    Args:
        dims: (x, y, z) extent, meters
        counts: particles per axis, each >= 2
        n_fixed: bottom layers tagged ELASTOMER_BOTTOM
        origin: lower corner; default puts the bottom-face center at the world origin

    Returns:
        ParticleSet with index (i * ny + j) * nz + k and a (nx, ny) surface index
    """
    dims = np.asarray(dims, dtype=np.float64).reshape(3)
    counts = tuple(int(c) for c in counts)
    if min(counts) < 2:
        raise ValueError(f"Lattice counts must be >= 2 per axis (got {counts})")
    if not 0 <= n_fixed < counts[2]:
        raise ValueError(f"n_fixed must be in [0, {counts[2]}) (got {n_fixed})")

    if origin is None:
        origin = np.array([-dims[0] / 2.0, -dims[1] / 2.0, 0.0])
    origin = np.asarray(origin, dtype=np.float64).reshape(3)

    axes = [origin[a] + np.linspace(0.0, dims[a], counts[a]) for a in range(3)]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    positions = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)

    nx, ny, nz = counts
    layer = np.broadcast_to(np.arange(nz), (nx, ny, nz)).ravel()
    tags = np.where(layer < n_fixed, MaterialTag.ELASTOMER_BOTTOM, MaterialTag.ELASTOMER).astype(np.int8)
    surface_index = np.arange(nx * ny * nz).reshape(nx, ny, nz)[:, :, -1].copy()

    logger.debug(f"Elastomer lattice {counts} over {dims} m, {n_fixed} fixed layers")
    return ParticleSet(
        positions=positions,
        tag=MaterialTag.ELASTOMER,
        source="lattice",
        tags=tags,
        lattice_counts=counts,
        dims=dims,
        surface_index=surface_index,
    )


def _parse_rows(lines, first_line_number, columns, path):
    """Line-by-line parse used to locate the offending line"""
    rows = []
    for offset, line in enumerate(lines):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        fields = text.split()
        try:
            row = [float(fields[c]) for c in columns]
        except (IndexError, ValueError):
            raise ParseError(f"expected numeric x y z, got '{line.strip()}'", path, first_line_number + offset)
        if not all(np.isfinite(row)):
            raise ParseError(f"non-finite coordinate in '{line.strip()}'", path, first_line_number + offset)
        rows.append(row)
    return np.array(rows, dtype=np.float64).reshape(-1, 3)


def _read_ply_header(lines, path):
    """Returns (header line count, vertex count, x/y/z column indices)"""
    if not lines or lines[0].strip() != "ply":
        raise ParseError("missing 'ply' magic", path, 1)

    n_vertices = None
    properties = []
    in_vertex = False
    for number, raw in enumerate(lines[1:], start=2):
        tokens = raw.split()
        if not tokens or tokens[0] in ("comment", "obj_info"):
            continue
        keyword = tokens[0]
        if keyword == "format":
            if len(tokens) < 2 or tokens[1] != "ascii":
                raise ParseError(f"only ASCII PLY is supported (got '{raw.strip()}')", path, number)
        elif keyword == "element":
            in_vertex = len(tokens) >= 3 and tokens[1] == "vertex"
            if in_vertex:
                try:
                    n_vertices = int(tokens[2])
                except ValueError:
                    raise ParseError(f"bad vertex count '{tokens[2]}'", path, number)
        elif keyword == "property":
            if in_vertex:
                properties.append(tokens[-1])
        elif keyword == "end_header":
            if n_vertices is None:
                raise ParseError("no 'element vertex' in header", path, number)
            try:
                columns = tuple(properties.index(axis) for axis in ("x", "y", "z"))
            except ValueError:
                raise ParseError(f"vertex properties {properties} lack x/y/z", path, number)
            return number, n_vertices, columns
        else:
            raise ParseError(f"unexpected header line '{raw.strip()}'", path, number)
    raise ParseError("header has no 'end_header'", path, len(lines))


def load_point_cloud(path):
    """
    Load an ASCII PLY or whitespace XYZ cloud

    Coordinates on disk are millimeters; the returned ParticleSet is in meters
    with vertices in file order.
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = f.readlines()
    except OSError as e:
        logger.error(f"Could not read point cloud {path}: {e}")
        raise

    if lines and lines[0].strip() == "ply":
        header_lines, n_vertices, columns = _read_ply_header(lines, path)
        body = lines[header_lines:header_lines + n_vertices]
        if len(body) < n_vertices:
            raise ParseError(f"header declares {n_vertices} vertices, file has {len(body)}", path, len(lines))
        first_line = header_lines + 1
    else:
        body = lines
        columns = (0, 1, 2)
        first_line = 1

    if not any(line.split("#", 1)[0].strip() for line in body):
        raise EmptyCloud(f"No points in {path}")

    try:
        points = np.loadtxt(body, comments="#", usecols=columns, ndmin=2, dtype=np.float64)
        if not np.all(np.isfinite(points)):
            raise ValueError("non-finite coordinate")
    except (ValueError, IndexError):
        points = _parse_rows(body, first_line, columns, path)

    if points.size == 0:
        raise EmptyCloud(f"No points in {path}")

    logger.info(f"Loaded {len(points)} points from {path}")
    return ParticleSet(positions=points.reshape(-1, 3) * FILE_UNIT, tag=MaterialTag.INDENTER, source=str(path))


def write_point_cloud(path, cloud):
    """Write as ASCII PLY (.ply) or XYZ (anything else), millimeters"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    points = cloud.positions / FILE_UNIT
    if path.suffix.lower() == ".ply":
        header = "\n".join([
            "ply",
            "format ascii 1.0",
            f"comment source {cloud.source}",
            "comment units mm",
            f"element vertex {len(points)}",
            "property float x",
            "property float y",
            "property float z",
            "end_header",
        ])
        np.savetxt(path, points, fmt="%.10g", header=header, comments="")
    else:
        np.savetxt(path, points, fmt="%.10g")
    logger.info(f"Wrote {len(points)} points to {path}")
    return path


def subsample(cloud, target_count, seed=0):
    """
    Uniform random subset without replacement, in original order

    Clamps to [1, len(cloud)]; the full cloud comes back unchanged when the target
    is not smaller than it.
    """
    n = len(cloud)
    target = int(target_count)
    if target >= n:
        if target > n:
            logger.warning(f"Requested {target} points from '{cloud.source}' but only {n} available; using all")
        return cloud
    if target < 1:
        logger.warning(f"Subsample target {target} clamped to 1")
        target = 1

    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(n, size=target, replace=False))
    return ParticleSet(
        positions=cloud.positions[keep],
        tag=cloud.tag,
        source=f"{cloud.source}[{target}@seed{seed}]",
    )


def place_indenter(cloud, pose, surface_z=None, gap=1e-4):
    """
    Rigidly transform a cloud

    Rotation about z (through the origin) then translation. With surface_z the
    cloud is additionally lifted so its lowest point sits gap + pose z above it.
    """
    if not isinstance(pose, Pose):
        pose = Pose(translation=tuple(pose))
    positions = cloud.positions @ pose.rotation().T + np.asarray(pose.translation, dtype=np.float64)
    if surface_z is not None and len(cloud):
        positions[:, 2] += surface_z + gap - cloud.positions[:, 2].min()
    return ParticleSet(positions=positions, tag=cloud.tag, source=cloud.source)
