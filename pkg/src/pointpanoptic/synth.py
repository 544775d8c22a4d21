"""Deterministic synthetic worlds: posed scans, camera label images,
ground-truth point labels, and label corruption.

A world is a flat ground square plus yaw-rotated boxes and vertical
cylinders, each carrying a semantic class and instance id. Scans are
ray-cast against this analytic geometry from a sensor trajectory; label
images are rendered through the camera rig with a z-buffer, so image
labels and point labels come from the same geometry. All randomness is
derived from (seed, scan index) streams, making outputs bit-stable.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .core import NO_INSTANCE, VOID_ID, CameraModel, ClassTable, RigidTransform, rot_z
from .errors import ConfigError
from .io import LabelImage, PanopticLabels, PointCloud

_SUITE_TAG = 0x5CE11E


@dataclass
class Box:
    center: tuple  # (x, y, z) of the box center
    size: tuple  # full extents (sx, sy, sz)
    yaw: float
    semantic: int
    instance: int

    def xy_radius(self) -> float:
        return 0.5 * float(np.hypot(self.size[0], self.size[1]))


@dataclass
class Cylinder:
    center: tuple  # (x, y, z) of the base center
    radius: float
    height: float
    semantic: int
    instance: int

    def xy_radius(self) -> float:
        return self.radius


@dataclass
class CameraSpec:
    yaw: float
    width: int = 192
    height: int = 144
    fx: float = 96.0
    fy: float = 96.0
    offset: tuple = (0.0, 0.0, 0.0)  # camera center in the sensor frame


@dataclass
class WorldSpec:
    ground_extent: float = 30.0  # half-size of the ground square
    ground_noise: float = 0.0  # sigma of vertical jitter on ground returns
    ground_class: int = 1
    objects: list = field(default_factory=list)
    cameras: list = field(default_factory=list)
    n_scans: int = 8
    scan_start: tuple = (-10.0, 0.0, 1.6)
    scan_step: tuple = (3.0, 0.0, 0.0)
    rings: int = 20
    azimuth_steps: int = 200
    fov_up_deg: float = 8.0
    fov_down_deg: float = -26.0
    max_range: float = 70.0
    table: ClassTable | None = None

    def __post_init__(self):
        if self.ground_extent <= 0 or self.n_scans < 1:
            raise ConfigError("world needs positive extent and at least one scan")
        if self.rings < 1 or self.azimuth_steps < 4:
            raise ConfigError("ray grid too small")
        if not self.cameras:
            raise ConfigError("world needs at least one camera")

    def validate_layout(self, overlap_tol: float = 0.01):
        """Reject xy-overlapping objects (bounding-circle test)."""
        if self.table is not None:
            for ob in self.objects:
                if not (0 < ob.semantic < self.table.num_classes):
                    raise ConfigError(f"object class {ob.semantic} outside class table")
        centers = np.array([ob.center[:2] for ob in self.objects], dtype=np.float64)
        radii = np.array([ob.xy_radius() for ob in self.objects])
        for i in range(len(self.objects)):
            d = np.hypot(*(centers[i + 1 :] - centers[i]).T)
            if np.any(d < radii[i + 1 :] + radii[i] - overlap_tol):
                raise ConfigError(f"object {i} overlaps a later object")


def default_class_table() -> ClassTable:
    """Class set used by the synthetic worlds and the CLI defaults."""
    return ClassTable(
        names=(
            "void",
            "ground",
            "barrier",
            "car",
            "pedestrian",
            "pole",
            "crate",
            "hauler",
        ),
        thing=(False, False, False, True, True, True, True, True),
        rare=(False, False, False, False, False, False, False, True),
    )


# ---------------------------------------------------------------------------
# analytic ray casting


def _ray_plane(origins, dirs, extent: float):
    """First hit with the ground square z=0; returns t (inf = miss)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t = -origins[:, 2] / dirs[:, 2]
    x = origins[:, 0] + t * dirs[:, 0]
    y = origins[:, 1] + t * dirs[:, 1]
    ok = (dirs[:, 2] < 0) & (t > 1e-6) & (np.abs(x) <= extent) & (np.abs(y) <= extent)
    return np.where(ok, t, np.inf)


def _ray_box(origins, dirs, box: Box):
    c = np.asarray(box.center, dtype=np.float64)
    r = rot_z(-box.yaw)
    o = (origins - c) @ r.T
    d = dirs @ r.T
    half = 0.5 * np.asarray(box.size, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
    t1 = (-half - o) * inv
    t2 = (half - o) * inv
    tmin = np.minimum(t1, t2)
    tmax = np.maximum(t1, t2)
    # axis-parallel rays: hit only if inside the slab
    par = np.abs(d) < 1e-12
    inside = np.abs(o) <= half
    tmin[par] = -np.inf
    tmax[par] = np.inf
    tmin[par & ~inside] = np.inf
    tenter = tmin.max(axis=1)
    texit = tmax.min(axis=1)
    ok = (tenter <= texit) & (texit > 1e-6) & (tenter > 1e-6)
    return np.where(ok, tenter, np.inf)


def _ray_cylinder(origins, dirs, cyl: Cylinder):
    cx, cy, z0 = cyl.center
    z1 = z0 + cyl.height
    ox = origins[:, 0] - cx
    oy = origins[:, 1] - cy
    dx, dy = dirs[:, 0], dirs[:, 1]
    a = dx * dx + dy * dy
    b = 2.0 * (ox * dx + oy * dy)
    cq = ox * ox + oy * oy - cyl.radius**2
    disc = b * b - 4.0 * a * cq
    t_side = np.full(len(origins), np.inf)
    ok = (disc >= 0) & (a > 1e-12)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = (-b - sq) / (2.0 * a)
        t1 = (-b + sq) / (2.0 * a)
    for t in (t0, t1):
        z = origins[:, 2] + t * dirs[:, 2]
        good = ok & (t > 1e-6) & (z >= z0) & (z <= z1) & (t < t_side)
        t_side[good] = t[good]
    # end caps
    t_cap = np.full(len(origins), np.inf)
    for zc in (z0, z1):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (zc - origins[:, 2]) / dirs[:, 2]
        x = origins[:, 0] + t * dirs[:, 0]
        y = origins[:, 1] + t * dirs[:, 1]
        good = (
            (np.abs(dirs[:, 2]) > 1e-12)
            & (t > 1e-6)
            & ((x - cx) ** 2 + (y - cy) ** 2 <= cyl.radius**2)
            & (t < t_cap)
        )
        t_cap[good] = t[good]
    return np.minimum(t_side, t_cap)


def _ray_object(origins, dirs, ob):
    if isinstance(ob, Box):
        return _ray_box(origins, dirs, ob)
    return _ray_cylinder(origins, dirs, ob)


def cast_rays(spec: WorldSpec, origins, dirs):
    """Nearest hit per ray: (t, semantic, instance); void marks a miss."""
    n = len(origins)
    best_t = _ray_plane(origins, dirs, spec.ground_extent)
    semantic = np.where(np.isfinite(best_t), spec.ground_class, VOID_ID).astype(np.uint16)
    instance = np.zeros(n, dtype=np.uint16)
    for ob in spec.objects:
        t = _ray_object(origins, dirs, ob)
        closer = t < best_t
        if closer.any():
            best_t[closer] = t[closer]
            semantic[closer] = ob.semantic
            instance[closer] = ob.instance if ob.instance else NO_INSTANCE
    return best_t, semantic, instance


# ---------------------------------------------------------------------------
# scan + image generation


def _scan_directions(spec: WorldSpec):
    elev = np.deg2rad(np.linspace(spec.fov_down_deg, spec.fov_up_deg, spec.rings))
    azim = np.linspace(0.0, 2.0 * np.pi, spec.azimuth_steps, endpoint=False)
    ee, aa = np.meshgrid(elev, azim, indexing="ij")
    dirs = np.stack(
        [np.cos(ee) * np.cos(aa), np.cos(ee) * np.sin(aa), np.sin(ee)], axis=-1
    ).reshape(-1, 3)
    rings = np.repeat(np.arange(spec.rings, dtype=np.uint8), spec.azimuth_steps)
    return dirs, rings


def build_cameras(specs: list) -> list:
    cams = []
    for cs in specs:
        yaw = cs.yaw
        forward = np.array([np.cos(yaw), np.sin(yaw), 0.0])
        down = np.array([0.0, 0.0, -1.0])
        right = np.cross(down, forward)
        r = np.stack([right, down, forward])  # sensor -> camera rows
        t = -r @ np.asarray(cs.offset, dtype=np.float64)
        cams.append(
            CameraModel(
                fx=cs.fx,
                fy=cs.fy,
                cx=cs.width / 2.0,
                cy=cs.height / 2.0,
                width=cs.width,
                height=cs.height,
                extrinsic=RigidTransform(r, t),
            )
        )
    return cams


def _hull_points(ob) -> np.ndarray:
    """Conservative world-frame hull samples for image-rect pruning."""
    if isinstance(ob, Box):
        half = 0.5 * np.asarray(ob.size, dtype=np.float64)
        corners = np.array(
            [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)]
        ) * half
        return corners @ rot_z(ob.yaw).T + np.asarray(ob.center)
    ang = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    ring = np.stack([np.cos(ang), np.sin(ang), np.zeros_like(ang)], axis=-1) * ob.radius
    base = ring + np.asarray(ob.center)
    return np.vstack([base, base + (0.0, 0.0, ob.height)])


def render_label_image(spec: WorldSpec, cam: CameraModel, pose: RigidTransform) -> LabelImage:
    """Z-buffered label raster through one camera at one scan pose.

    The ground plane is cast for every pixel; each object only for the
    pixels of its projected hull rectangle, so densely populated worlds
    render in milliseconds.
    """
    h, w = cam.height, cam.width
    us, vs = np.meshgrid(np.arange(w) + 0.5, np.arange(h) + 0.5)
    d_cam = np.stack(
        [(us - cam.cx) / cam.fx, (vs - cam.cy) / cam.fy, np.ones_like(us)], axis=-1
    ).reshape(-1, 3)
    cam_to_sensor = cam.extrinsic.inverse()
    origin_w = pose.apply(cam_to_sensor.translation)
    dirs_w = d_cam @ cam_to_sensor.rotation.T @ pose.rotation.T

    # depth buffer in camera z units (d_cam has unit z, so t == depth)
    depth = _ray_plane(np.broadcast_to(origin_w, dirs_w.shape), dirs_w, spec.ground_extent)
    semantic = np.where(np.isfinite(depth), spec.ground_class, VOID_ID).astype(np.uint16)
    instance = np.zeros(len(dirs_w), dtype=np.uint16)

    world_to_cam = cam.extrinsic.compose(pose.inverse())
    for ob in spec.objects:
        hull_cam = world_to_cam.apply(_hull_points(ob))
        z = hull_cam[:, 2]
        if (z <= 0.05).all():
            continue
        if (z <= 0.05).any():
            u0, v0, u1, v1 = 0, 0, w, h  # straddles the image plane
        else:
            uu = cam.fx * hull_cam[:, 0] / z + cam.cx
            vv = cam.fy * hull_cam[:, 1] / z + cam.cy
            u0 = max(int(np.floor(uu.min())) - 2, 0)
            v0 = max(int(np.floor(vv.min())) - 2, 0)
            u1 = min(int(np.ceil(uu.max())) + 2, w)
            v1 = min(int(np.ceil(vv.max())) + 2, h)
            if u0 >= u1 or v0 >= v1:
                continue
        cols, rows = np.meshgrid(np.arange(u0, u1), np.arange(v0, v1))
        flat = (rows * w + cols).reshape(-1)
        t = _ray_object(
            np.broadcast_to(origin_w, (len(flat), 3)), dirs_w[flat], ob
        )
        closer = t < depth[flat]
        if closer.any():
            upd = flat[closer]
            depth[upd] = t[closer]
            semantic[upd] = ob.semantic
            instance[upd] = ob.instance if ob.instance else NO_INSTANCE
    return LabelImage(semantic.reshape(h, w), instance.reshape(h, w))


@dataclass
class SyntheticWorld:
    spec: WorldSpec
    table: ClassTable
    scans: list
    poses: list
    cameras: list
    label_images: list  # [scan][camera]
    gt_labels: list
    in_frustum: list | None = None  # per scan, bool per point
    unoccluded: list | None = None


def generate_world(
    spec: WorldSpec, seed: int, compute_visibility: bool = False
) -> SyntheticWorld:
    """Ray-cast the world into posed scans, images, and gt point labels."""
    spec.validate_layout()
    table = spec.table or default_class_table()
    cams = build_cameras(spec.cameras)
    dirs_s, rings = _scan_directions(spec)

    scans, poses, images, gt = [], [], [], []
    in_frustum, unoccluded = [], []
    start = np.asarray(spec.scan_start, dtype=np.float64)
    step = np.asarray(spec.scan_step, dtype=np.float64)
    for si in range(spec.n_scans):
        pose = RigidTransform(np.eye(3), start + si * step)
        rng = np.random.default_rng(np.random.SeedSequence([seed, si, 0xA11CE]))
        origin = np.broadcast_to(pose.translation, dirs_s.shape)
        t, semantic, instance = cast_rays(spec, origin, dirs_s)
        hit = np.isfinite(t) & (t <= spec.max_range)
        pts_sensor = dirs_s[hit] * t[hit, None]
        sem, inst, ring_hit = semantic[hit], instance[hit], rings[hit]
        if spec.ground_noise > 0:
            on_ground = sem == spec.ground_class
            jitter = rng.normal(0.0, spec.ground_noise, size=int(on_ground.sum()))
            pts_sensor[on_ground, 2] += jitter
        cloud = PointCloud(
            points=pts_sensor.astype(np.float32),
            intensity=rng.uniform(0.0, 1.0, size=len(pts_sensor)).astype(np.float32),
            ring=ring_hit,
            scan_id=f"{si:06d}",
            timestamp_us=si * 100_000,
        )
        scans.append(cloud)
        poses.append(pose)
        images.append([render_label_image(spec, cam, pose) for cam in cams])
        gt.append(PanopticLabels(sem, inst))
        if compute_visibility:
            fr, un = _visibility(spec, cams, pose, pts_sensor)
            in_frustum.append(fr)
            unoccluded.append(un)
    return SyntheticWorld(
        spec=spec,
        table=table,
        scans=scans,
        poses=poses,
        cameras=cams,
        label_images=images,
        gt_labels=gt,
        in_frustum=in_frustum if compute_visibility else None,
        unoccluded=unoccluded if compute_visibility else None,
    )


def _visibility(spec: WorldSpec, cams: list, pose: RigidTransform, pts_sensor):
    """Per point: lies in some camera frustum / unobstructed from it."""
    from .projection import Z_MIN

    n = len(pts_sensor)
    in_frustum = np.zeros(n, dtype=bool)
    unoccluded = np.zeros(n, dtype=bool)
    for cam in cams:
        p_cam = cam.extrinsic.apply(pts_sensor)
        z = p_cam[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = cam.fx * p_cam[:, 0] / z + cam.cx
            v = cam.fy * p_cam[:, 1] / z + cam.cy
        vis = (z > Z_MIN) & (u >= 0) & (u < cam.width) & (v >= 0) & (v < cam.height)
        if not vis.any():
            continue
        in_frustum |= vis
        cam_origin_s = cam.extrinsic.inverse().translation
        origin_w = pose.apply(cam_origin_s)
        rays_w = pose.apply(pts_sensor[vis]) - origin_w
        t, _, _ = cast_rays(spec, np.broadcast_to(origin_w, rays_w.shape), rays_w)
        clear = t >= 1.0 - 1e-4  # first hit at (or beyond) the point itself
        idx = np.flatnonzero(vis)
        unoccluded[idx[clear]] = True
    unoccluded &= in_frustum
    return in_frustum, unoccluded


# ---------------------------------------------------------------------------
# label corruption


@dataclass
class UniformFlip:
    p: float


@dataclass
class VoidDropout:
    p: float


@dataclass
class BoundaryBandFlip:
    p: float
    width: float


def corrupt_labels(
    labels: PanopticLabels,
    model,
    seed: int,
    table: ClassTable,
    points: np.ndarray | None = None,
    eligible: np.ndarray | None = None,
):
    """Deterministically corrupt labels; returns (labels, corrupted indices).

    ``eligible`` restricts which points may be touched; the boundary-band
    model additionally needs the point positions.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xC0FFEE]))
    sem = labels.semantic.copy()
    inst = labels.instance.copy()
    n = len(sem)
    mask = np.ones(n, dtype=bool) if eligible is None else np.asarray(eligible, bool).copy()

    if isinstance(model, BoundaryBandFlip):
        if points is None:
            raise ConfigError("boundary-band corruption needs point positions")
        from .cluster import build_kdtree

        tree = build_kdtree(points)
        pairs = tree.query_pairs(model.width)
        band = np.zeros(n, dtype=bool)
        if len(pairs):
            differ = sem[pairs[:, 0]] != sem[pairs[:, 1]]
            band[pairs[differ, 0]] = True
            band[pairs[differ, 1]] = True
        mask &= band
        p = model.p
    elif isinstance(model, (UniformFlip, VoidDropout)):
        p = model.p
    else:
        raise ConfigError(f"unknown corruption model {model!r}")
    mask &= sem != VOID_ID  # void points carry no label to corrupt
    if not (0.0 <= p <= 1.0):
        raise ConfigError("corruption probability must lie in [0, 1]")

    candidates = np.flatnonzero(mask)
    hit = candidates[rng.uniform(size=len(candidates)) < p]
    if isinstance(model, VoidDropout):
        sem[hit] = VOID_ID
        inst[hit] = NO_INSTANCE
    else:
        choices = np.arange(1, table.num_classes)
        draw = choices[rng.integers(0, len(choices) - 1, size=len(hit))]
        # skip the current class so every flip changes the label
        draw = np.where(draw >= sem[hit], draw + 1, draw)
        sem[hit] = draw.astype(np.uint16)
        stuffed = ~table.thing_mask()[sem[hit]]
        inst[hit[stuffed]] = NO_INSTANCE
    return PanopticLabels(sem, inst), hit


# ---------------------------------------------------------------------------
# standard synthetic suite


def standard_world(seed: int, n_objects: int = 120, n_scans: int = 6) -> WorldSpec:
    """The fixed desk-scale world family used by the test suites.

    Objects float slightly above the ground so the plane inlier band
    stays free of object points; many small objects keep the cluster
    structure rich across minimum-cluster-size settings.
    """
    rng = np.random.default_rng(np.random.SeedSequence([_SUITE_TAG, seed]))
    table = default_class_table()
    n_scans_traj = n_scans
    x0, x1 = -9.0, -9.0 + (n_scans_traj - 1) * 3.5
    rings, azimuth_steps = 14, 170
    az_step = 2.0 * np.pi / azimuth_steps
    elev_step = np.deg2rad(6.0 - (-24.0)) / (rings - 1)

    def corridor_distance(x, y):
        dx = max(x0 - x, 0.0, x - x1)
        return float(np.hypot(dx, y))

    objects = []
    centers = []
    radii = []
    instance = 1
    tries = 0
    while len(objects) < n_objects and tries < n_objects * 80:
        tries += 1
        x = rng.uniform(-24.0, 24.0)
        y = rng.uniform(-24.0, 24.0)
        if abs(y) < 1.8:  # keep the trajectory corridor clear
            continue
        # past ~19 m the ray grid is coarser than object gaps; density
        # clustering cannot separate what the grid cannot resolve
        if corridor_distance(x, y) > 19.0:
            continue
        kind_r = 2.8  # generous bound on object xy radius
        # objects hugging the trajectory poke out of the camera band
        if corridor_distance(x, y) < kind_r + 4.5:
            continue
        kind = rng.integers(0, 100)
        z0 = rng.uniform(0.45, 0.75)
        if kind < 18:  # car
            ob = Box((x, y, z0 + 0.7), (3.6, 1.8, 1.4), rng.uniform(0, np.pi), 3, instance)
        elif kind < 38:  # pedestrian
            ob = Cylinder((x, y, z0), 0.35, 1.8, 4, instance)
        elif kind < 58:  # pole
            ob = Cylinder((x, y, z0), 0.30, 3.0, 5, instance)
        elif kind < 88:  # crate
            s = rng.uniform(0.7, 1.5)
            ob = Box((x, y, z0 + s / 2), (s, s, s), rng.uniform(0, np.pi), 6, instance)
        elif kind < 92:  # hauler (rare class)
            ob = Box((x, y, z0 + 1.2), (5.5, 2.4, 2.4), rng.uniform(0, np.pi), 7, instance)
        else:  # barrier segment (stuff)
            ob = Box((x, y, z0 + 0.5), (3.0, 0.4, 1.0), rng.uniform(0, np.pi), 2, 0)
        r = ob.xy_radius()
        # skip objects the ray grid would starve (clusters need members)
        d = corridor_distance(x, y)
        height = ob.size[2] if isinstance(ob, Box) else ob.height
        expected = (2.0 * r / d / az_step) * (height / d / elev_step)
        if expected < 4.0:
            continue
        if centers:
            dc = np.hypot(*(np.array(centers) - (x, y)).T)
            if np.any(dc < np.array(radii) + r + 2.2):
                continue
        centers.append((x, y))
        radii.append(r)
        if ob.instance:
            instance += 1
        objects.append(ob)
    cam_specs = [
        CameraSpec(
            yaw=a,
            width=256,
            height=192,
            fx=128.0,
            fy=106.0,
            offset=(0.25 * np.cos(a), 0.25 * np.sin(a), 0.15),
        )
        for a in (0.0, np.pi / 2, np.pi, 3 * np.pi / 2)
    ]
    return WorldSpec(
        ground_extent=30.0,
        ground_noise=0.03,
        ground_class=1,
        objects=objects,
        cameras=cam_specs,
        n_scans=n_scans,
        scan_start=(-9.0, 0.0, 1.7),
        scan_step=(3.5, 0.0, 0.0),
        rings=14,
        azimuth_steps=170,
        fov_up_deg=6.0,
        fov_down_deg=-24.0,
        max_range=60.0,
        table=table,
    )


# ---------------------------------------------------------------------------
# world spec (de)serialization


def _object_to_dict(ob) -> dict:
    if isinstance(ob, Box):
        return {
            "shape": "box",
            "center": list(ob.center),
            "size": list(ob.size),
            "yaw": ob.yaw,
            "semantic": ob.semantic,
            "instance": ob.instance,
        }
    return {
        "shape": "cylinder",
        "center": list(ob.center),
        "radius": ob.radius,
        "height": ob.height,
        "semantic": ob.semantic,
        "instance": ob.instance,
    }


def _object_from_dict(d: dict):
    if d["shape"] == "box":
        return Box(tuple(d["center"]), tuple(d["size"]), d["yaw"], d["semantic"], d["instance"])
    if d["shape"] == "cylinder":
        return Cylinder(tuple(d["center"]), d["radius"], d["height"], d["semantic"], d["instance"])
    raise ConfigError(f"unknown object shape {d.get('shape')!r}")


def world_to_dict(spec: WorldSpec) -> dict:
    return {
        "ground_extent": spec.ground_extent,
        "ground_noise": spec.ground_noise,
        "ground_class": spec.ground_class,
        "objects": [_object_to_dict(ob) for ob in spec.objects],
        "cameras": [
            {
                "yaw": c.yaw,
                "width": c.width,
                "height": c.height,
                "fx": c.fx,
                "fy": c.fy,
                "offset": list(c.offset),
            }
            for c in spec.cameras
        ],
        "n_scans": spec.n_scans,
        "scan_start": list(spec.scan_start),
        "scan_step": list(spec.scan_step),
        "rings": spec.rings,
        "azimuth_steps": spec.azimuth_steps,
        "fov_up_deg": spec.fov_up_deg,
        "fov_down_deg": spec.fov_down_deg,
        "max_range": spec.max_range,
        "classes": spec.table.to_dict()["classes"] if spec.table else None,
    }


def world_from_dict(d: dict) -> WorldSpec:
    try:
        return WorldSpec(
            ground_extent=d["ground_extent"],
            ground_noise=d.get("ground_noise", 0.0),
            ground_class=d.get("ground_class", 1),
            objects=[_object_from_dict(o) for o in d.get("objects", [])],
            cameras=[
                CameraSpec(
                    yaw=c["yaw"],
                    width=c.get("width", 192),
                    height=c.get("height", 144),
                    fx=c.get("fx", 96.0),
                    fy=c.get("fy", 96.0),
                    offset=tuple(c.get("offset", (0.0, 0.0, 0.0))),
                )
                for c in d["cameras"]
            ],
            n_scans=d.get("n_scans", 8),
            scan_start=tuple(d.get("scan_start", (-10.0, 0.0, 1.6))),
            scan_step=tuple(d.get("scan_step", (3.0, 0.0, 0.0))),
            rings=d.get("rings", 20),
            azimuth_steps=d.get("azimuth_steps", 200),
            fov_up_deg=d.get("fov_up_deg", 8.0),
            fov_down_deg=d.get("fov_down_deg", -26.0),
            max_range=d.get("max_range", 70.0),
            table=ClassTable.from_dict({"classes": d["classes"]}) if d.get("classes") else None,
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"invalid world spec: {exc}") from exc


def load_world_spec(path) -> WorldSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return world_from_dict(json.load(fh))


def save_world_spec(spec: WorldSpec, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(world_to_dict(spec), fh, indent=2, sort_keys=True)
