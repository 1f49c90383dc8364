"""Synthetic scene oracle.

Analytic road surfaces with smooth elliptical depressions are ray-cast
into exact depth maps, together with ground-truth boxes, per-depression
true areas, noisy detections, and camera-motion correspondences. The
rendered files use the same formats the pipeline consumes, so synthetic
and real sequences are interchangeable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import PotholeNeverVisible
from .geometry import BBox, CameraIntrinsics, DepthMap, Detection, MotionTransform

# ---------------------------------------------------------------------------
# surface models (world frame: x right, y down, z forward)


@dataclass(frozen=True)
class PotholeSpec:
    """Smooth elliptical depression in the surface.

    center is (x, y) in world meters on the base surface; depth is the
    extra distance (meters) the surface recedes at the depression center.
    """

    center: tuple[float, float]
    a: float
    b: float
    depth: float = 0.05

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("semi-axes must be positive")

    @property
    def planar_area(self) -> float:
        return math.pi * self.a * self.b


@dataclass(frozen=True)
class Surface:
    """Base surface z = f(x, y) plus cosine-bump depressions.

    kind: "plane" (z = z0), "tilted" (z = z0 + tan(pitch) * y) or
    "undulating" (z = z0 + amplitude * sin(2*pi*y / wavelength)).
    """

    kind: str = "plane"
    z0: float = 5.0
    pitch_deg: float = 0.0
    amplitude: float = 0.0
    wavelength: float = 2.0
    potholes: tuple[PotholeSpec, ...] = ()

    def base_height(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        if self.kind == "plane":
            return np.full_like(np.asarray(x, dtype=np.float64), self.z0)
        if self.kind == "tilted":
            return self.z0 + math.tan(math.radians(self.pitch_deg)) * y
        if self.kind == "undulating":
            return self.z0 + self.amplitude * np.sin(2.0 * math.pi * y / self.wavelength)
        raise ValueError(f"unknown surface kind {self.kind!r}")

    def base_grad(self, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        zeros = np.zeros_like(np.asarray(x, dtype=np.float64))
        if self.kind == "plane":
            return zeros, zeros.copy()
        if self.kind == "tilted":
            return zeros, zeros + math.tan(math.radians(self.pitch_deg))
        if self.kind == "undulating":
            gy = (
                self.amplitude
                * (2.0 * math.pi / self.wavelength)
                * np.cos(2.0 * math.pi * y / self.wavelength)
            )
            return zeros, gy
        raise ValueError(f"unknown surface kind {self.kind!r}")

    def height(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Surface depth-coordinate z at world (x, y), depressions included."""
        z = self.base_height(x, y)
        for p in self.potholes:
            r2 = ((x - p.center[0]) / p.a) ** 2 + ((y - p.center[1]) / p.b) ** 2
            inside = r2 < 1.0
            if np.any(inside):
                bump = np.zeros_like(z)
                r = np.sqrt(np.clip(r2, 0.0, 1.0))
                bump[inside] = np.cos(0.5 * math.pi * r[inside]) ** 2
                z = z + p.depth * bump
        return z

    def grad(self, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        gx, gy = self.base_grad(x, y)
        gx = np.array(gx, dtype=np.float64)
        gy = np.array(gy, dtype=np.float64)
        for p in self.potholes:
            xs = (x - p.center[0]) / p.a
            ys = (y - p.center[1]) / p.b
            r2 = xs ** 2 + ys ** 2
            inside = (r2 < 1.0) & (r2 > 1e-16)
            if np.any(inside):
                r = np.sqrt(r2[inside])
                # d/dr cos^2(pi r / 2) = -(pi/2) sin(pi r)
                dr = -0.5 * math.pi * np.sin(math.pi * r) * p.depth
                gx[inside] += dr * xs[inside] / (p.a * r)
                gy[inside] += dr * ys[inside] / (p.b * r)
        return gx, gy


@dataclass(frozen=True)
class CameraPose:
    """Camera position in world meters and small-angle attitude in radians."""

    position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    pitch: float = 0.0
    yaw: float = 0.0
    roll: float = 0.0

    def rotation(self) -> np.ndarray:
        """World-to-camera rotation matrix."""
        return Rotation.from_euler("xyz", [self.pitch, self.yaw, self.roll]).as_matrix()


@dataclass(frozen=True)
class NoiseSpec:
    box_jitter_px: float = 0.0
    depth_rel_std: float = 0.0
    conf_c0: float = 0.95
    conf_slope: float = 0.02  # per meter of distance
    conf_noise_std: float = 0.0
    shake_px: float = 0.0  # extra per-frame random camera-shake translation


@dataclass(frozen=True)
class SceneSpec:
    intrinsics: CameraIntrinsics
    surface: Surface
    frames: int = 1
    camera_path: tuple[CameraPose, ...] = ()
    noise: NoiseSpec = NoiseSpec()
    n_correspondences: int = 200
    seed: int = 0

    def pose(self, k: int) -> CameraPose:
        if not self.camera_path:
            return CameraPose()
        return self.camera_path[min(k, len(self.camera_path) - 1)]


@dataclass
class FrameData:
    frame: int
    depth: DepthMap
    detections: list[Detection]
    correspondences: Optional[list[tuple[tuple[float, float], tuple[float, float]]]]


@dataclass
class GroundTruth:
    boxes: dict[int, dict[int, BBox]]  # frame -> pothole id -> box
    planar_areas: dict[int, float]  # pothole id -> pi*a*b
    surface_areas: dict[int, float]  # pothole id -> integrated opening area
    motions: dict[int, MotionTransform]  # frame -> transform from frame-1


# ---------------------------------------------------------------------------
# ray casting


def _ray_dirs(R: np.ndarray, xs_hat: np.ndarray, ys_hat: np.ndarray) -> np.ndarray:
    """World-frame ray directions for camera rays (xhat, yhat, 1).

    Parametrized by camera-frame depth: world point = c + Z * dir.
    """
    d_cam = np.stack([xs_hat, ys_hat, np.ones_like(xs_hat)], axis=-1)
    return d_cam @ R  # row-wise R^T * d_cam


def _solve_depth(
    surface: Surface,
    pose: CameraPose,
    xs_hat: np.ndarray,
    ys_hat: np.ndarray,
    iters: int = 80,
) -> np.ndarray:
    """Camera-frame depth Z solving c + Z * d = surface along each ray.

    Fixed-point iteration; gentle slopes converge geometrically.
    """
    R = pose.rotation()
    d = _ray_dirs(R, xs_hat, ys_hat)
    cx, cy, cz = pose.position
    dx, dy, dz = d[..., 0], d[..., 1], d[..., 2]
    z = np.maximum((surface.z0 - cz) / np.maximum(dz, 1e-6), 0.1)
    for _ in range(iters):
        zs = surface.height(cx + z * dx, cy + z * dy)
        z = (zs - cz) / np.maximum(dz, 1e-6)
    return z


def render_depth(spec: SceneSpec, frame: int, rng: Optional[np.random.Generator] = None) -> DepthMap:
    intr = spec.intrinsics
    pose = spec.pose(frame)
    us = (np.arange(intr.width) - intr.p_u) / intr.f_u
    vs = (np.arange(intr.height) - intr.p_v) / intr.f_v
    xs_hat, ys_hat = np.meshgrid(us, vs)
    z = _solve_depth(spec.surface, pose, xs_hat, ys_hat)
    if rng is not None and spec.noise.depth_rel_std > 0:
        z = z * (1.0 + spec.noise.depth_rel_std * rng.standard_normal(z.shape))
    return DepthMap(intr.width, intr.height, z.astype(np.float32))


def _project_world(points: np.ndarray, pose: CameraPose, intr: CameraIntrinsics) -> np.ndarray:
    """World (N, 3) points to pixel (N, 2); points behind the camera get NaN."""
    R = pose.rotation()
    cam = (points - np.asarray(pose.position)) @ R.T
    z = cam[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = intr.f_u * cam[:, 0] / z + intr.p_u
        v = intr.f_v * cam[:, 1] / z + intr.p_v
    out = np.stack([u, v], axis=1)
    out[z <= 0.05] = np.nan
    return out


def _gt_box(p: PotholeSpec, surface: Surface, pose: CameraPose, intr: CameraIntrinsics) -> Optional[BBox]:
    """Project the depression rim and take the pixel-aligned hull."""
    phi = np.linspace(0.0, 2.0 * math.pi, 64, endpoint=False)
    x = p.center[0] + p.a * np.cos(phi)
    y = p.center[1] + p.b * np.sin(phi)
    z = surface.base_height(x, y)
    pix = _project_world(np.stack([x, y, z], axis=1), pose, intr)
    if np.isnan(pix).any():
        return None
    u0, v0 = pix[:, 0].min(), pix[:, 1].min()
    u1, v1 = pix[:, 0].max(), pix[:, 1].max()
    if u1 < 0 or v1 < 0 or u0 > intr.width - 1 or v0 > intr.height - 1:
        return None
    return BBox(float(u0), float(v0), float(u1 - u0), float(v1 - v0))


def _confidence(dist: float, noise: NoiseSpec, rng: np.random.Generator) -> float:
    c = noise.conf_c0 - noise.conf_slope * dist
    if noise.conf_noise_std > 0:
        c += noise.conf_noise_std * rng.standard_normal()
    return float(np.clip(c, 0.05, 0.99))


def _true_motion(
    spec: SceneSpec, prev_frame: int, frame: int, n_grid: int = 12
) -> MotionTransform:
    """Best-fit affine pixel map from the previous frame to this one,
    computed from exact projections of static surface points."""
    intr = spec.intrinsics
    prev_pose, pose = spec.pose(prev_frame), spec.pose(frame)
    us = np.linspace(0.15, 0.85, n_grid) * intr.width
    vs = np.linspace(0.15, 0.85, n_grid) * intr.height
    uu, vv = np.meshgrid(us, vs)
    xs_hat = (uu - intr.p_u) / intr.f_u
    ys_hat = (vv - intr.p_v) / intr.f_v
    z = _solve_depth(spec.surface, prev_pose, xs_hat, ys_hat)
    R = prev_pose.rotation()
    d = _ray_dirs(R, xs_hat, ys_hat)
    world = np.asarray(prev_pose.position) + z[..., None] * d
    curr = _project_world(world.reshape(-1, 3), pose, intr)
    prev = np.stack([uu.ravel(), vv.ravel()], axis=1)
    ok = ~np.isnan(curr).any(axis=1)
    A = np.column_stack([prev[ok], np.ones(ok.sum())])
    coef, _, _, _ = np.linalg.lstsq(A, curr[ok], rcond=None)
    m = np.eye(3)
    m[:2, :2] = coef[:2].T
    m[:2, 2] = coef[2]
    return MotionTransform(m)


def _correspondences(
    spec: SceneSpec, prev_frame: int, frame: int, rng: np.random.Generator
) -> list[tuple[tuple[float, float], tuple[float, float]]]:
    intr = spec.intrinsics
    prev_pose, pose = spec.pose(prev_frame), spec.pose(frame)
    n = spec.n_correspondences
    uu = rng.uniform(0, intr.width - 1, size=n)
    vv = rng.uniform(0, intr.height - 1, size=n)
    xs_hat = (uu - intr.p_u) / intr.f_u
    ys_hat = (vv - intr.p_v) / intr.f_v
    z = _solve_depth(spec.surface, prev_pose, xs_hat, ys_hat)
    R = prev_pose.rotation()
    d = _ray_dirs(R, xs_hat, ys_hat)
    world = np.asarray(prev_pose.position) + z[..., None] * d
    curr = _project_world(world, pose, intr)
    pairs = []
    for i in range(n):
        if np.isnan(curr[i]).any():
            continue
        pairs.append(((float(uu[i]), float(vv[i])), (float(curr[i, 0]), float(curr[i, 1]))))
    return pairs


def render(spec: SceneSpec) -> tuple[list[FrameData], GroundTruth]:
    """Render all frames deterministically (RNG streams split per frame)."""
    intr = spec.intrinsics
    streams = np.random.SeedSequence(spec.seed).spawn(spec.frames)
    frames: list[FrameData] = []
    gt_boxes: dict[int, dict[int, BBox]] = {}
    motions: dict[int, MotionTransform] = {}
    seen = {i: False for i in range(len(spec.surface.potholes))}

    for k in range(spec.frames):
        rng = np.random.default_rng(streams[k])
        pose = spec.pose(k)
        depth = render_depth(spec, k, rng if spec.noise.depth_rel_std > 0 else None)
        boxes: dict[int, BBox] = {}
        dets: list[Detection] = []
        for i, p in enumerate(spec.surface.potholes):
            box = _gt_box(p, spec.surface, pose, intr)
            if box is None:
                continue
            seen[i] = True
            boxes[i] = box
            jit = spec.noise.box_jitter_px
            if jit > 0:
                dx, dy, dw, dh = jit * rng.standard_normal(4)
            else:
                dx = dy = dw = dh = 0.0
            det_box = BBox(
                box.x + dx, box.y + dy, max(2.0, box.w + dw), max(2.0, box.h + dh)
            )
            center_world = np.array(
                [p.center[0], p.center[1], float(spec.surface.base_height(
                    np.array(p.center[0]), np.array(p.center[1])))]
            )
            dist = float(np.linalg.norm(center_world - np.asarray(pose.position)))
            dets.append(
                Detection(det_box, _confidence(dist, spec.noise, rng), class_id=0, frame=k)
            )
        gt_boxes[k] = boxes
        corr = None
        if k > 0:
            motions[k] = _true_motion(spec, k - 1, k)
            corr = _correspondences(spec, k - 1, k, rng)
        frames.append(FrameData(frame=k, depth=depth, detections=dets, correspondences=corr))

    for i, was_seen in seen.items():
        if not was_seen:
            raise PotholeNeverVisible(f"pothole {i} never enters the camera view")

    planar = {i: p.planar_area for i, p in enumerate(spec.surface.potholes)}
    surf = {i: pothole_surface_area(spec.surface, p) for i, p in enumerate(spec.surface.potholes)}
    return frames, GroundTruth(boxes=gt_boxes, planar_areas=planar, surface_areas=surf, motions=motions)


def scene_spec_from_dict(doc: dict) -> SceneSpec:
    """Build a SceneSpec from a parsed YAML/JSON mapping."""
    intr = CameraIntrinsics(**doc["intrinsics"])
    surf_doc = dict(doc.get("surface", {}))
    potholes = tuple(
        PotholeSpec(
            center=tuple(p["center"]),
            a=float(p["a"]),
            b=float(p["b"]),
            depth=float(p.get("depth", 0.05)),
        )
        for p in surf_doc.pop("potholes", [])
    )
    surface = Surface(potholes=potholes, **surf_doc)
    path = tuple(
        CameraPose(
            position=tuple(p.get("position", (0.0, 0.0, 0.0))),
            pitch=float(p.get("pitch", 0.0)),
            yaw=float(p.get("yaw", 0.0)),
            roll=float(p.get("roll", 0.0)),
        )
        for p in doc.get("camera_path", [])
    )
    noise = NoiseSpec(**doc.get("noise", {}))
    return SceneSpec(
        intrinsics=intr,
        surface=surface,
        frames=int(doc.get("frames", 1)),
        camera_path=path,
        noise=noise,
        n_correspondences=int(doc.get("n_correspondences", 200)),
        seed=int(doc.get("seed", 0)),
    )


def write_scene(spec: SceneSpec, out_dir) -> "Path":
    """Render a scene and write it in the pipeline's own file formats.

    Produces manifest.yaml, per-frame depth (PFM), detections, motion
    correspondences, plus ground-truth boxes and areas.
    """
    from pathlib import Path

    from . import formats

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    frames, gt = render(spec)
    entries = []
    gt_dets: dict[int, list[Detection]] = {}
    for f in frames:
        depth_name = f"depth_{f.frame:04d}.pfm"
        det_name = f"dets_{f.frame:04d}.txt"
        (out / depth_name).write_bytes(formats.write_pfm(f.depth))
        (out / det_name).write_text(
            formats.write_detections({f.frame: f.detections})
        )
        motion_name = None
        if f.correspondences is not None:
            motion_name = f"motion_{f.frame:04d}.txt"
            (out / motion_name).write_text(
                formats.write_correspondences(f.correspondences)
            )
        entries.append(
            formats.FrameEntry(
                frame=f.frame,
                depth_path=out / depth_name,
                detections_path=out / det_name,
                motion_path=(out / motion_name) if motion_name else None,
            )
        )
        gt_dets[f.frame] = [
            Detection(box, 1.0, 0, f.frame) for box in gt.boxes[f.frame].values()
        ]
    manifest = formats.SequenceManifest(
        intrinsics=spec.intrinsics, frames=entries, dataset="synthetic"
    )
    manifest.dump(out / "manifest.yaml")
    (out / "gt_boxes.txt").write_text(formats.write_detections(gt_dets))
    gt_lines = [f"format_version={formats.FORMAT_VERSION}"]
    for i in sorted(gt.planar_areas):
        gt_lines.append(
            f"pothole={i} planar_area_m2={gt.planar_areas[i]:.8f} "
            f"surface_area_m2={gt.surface_areas[i]:.8f}"
        )
    (out / "gt_areas.txt").write_text("\n".join(gt_lines) + "\n")
    return out / "manifest.yaml"


def simulate_area_series(
    true_area: float,
    n: int,
    seed: int,
    d_start: float = 14.0,
    d_end: float = 3.0,
    noise: NoiseSpec = NoiseSpec(conf_noise_std=0.03),
    base_rel_std: float = 0.05,
    dist_rel_std_per_m: float = 0.015,
) -> list[tuple[float, float, float]]:
    """Noisy (measurement, confidence, distance) triples for one approach
    pass: the camera closes in, confidence rises, measurement noise decays
    with proximity and confidence. Drives the smoother ablations without a
    full depth render."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n):
        d = d_start + (d_end - d_start) * k / max(1, n - 1)
        c = _confidence(d, noise, rng)
        rel_std = base_rel_std + dist_rel_std_per_m * d + 0.05 * (1.0 - c)
        z = true_area * (1.0 + rel_std * rng.standard_normal())
        out.append((max(1e-4, z), c, d))
    return out


# ---------------------------------------------------------------------------
# analytic area oracles


def _gauss_legendre_2d(f, x0, x1, y0, y1, n):
    nodes, weights = np.polynomial.legendre.leggauss(n)
    xs = 0.5 * (x1 - x0) * nodes + 0.5 * (x1 + x0)
    ys = 0.5 * (y1 - y0) * nodes + 0.5 * (y1 + y0)
    X, Y = np.meshgrid(xs, ys)
    W = np.outer(weights, weights)
    vals = f(X, Y)
    return 0.25 * (x1 - x0) * (y1 - y0) * float(np.sum(W * vals))


def pothole_surface_area(surface: Surface, p: PotholeSpec, rel_tol: float = 1e-6) -> float:
    """Surface area of the depression opening (its elliptical footprint),
    integrated over the full surface including the bump.

    Uses elliptical polar coordinates so the integrand stays smooth on the
    whole [0, 1] x [0, 2*pi] domain.
    """

    def integrand(r, phi):
        X = p.center[0] + p.a * r * np.cos(phi)
        Y = p.center[1] + p.b * r * np.sin(phi)
        gx, gy = surface.grad(X, Y)
        return np.sqrt(1.0 + gx ** 2 + gy ** 2) * p.a * p.b * r

    prev = None
    for n in (16, 32, 64, 128):
        val = _gauss_legendre_2d(integrand, 0.0, 1.0, 0.0, 2.0 * math.pi, n)
        if prev is not None and abs(val - prev) <= rel_tol * abs(val):
            return val
        prev = val
    return val


def analytic_rect_footprint_area(
    spec: SceneSpec, box: BBox, frame: int = 0, rel_tol: float = 1e-6
) -> float:
    """Exact surface area seen through the box's pixel grid.

    Integrates |dS/du x dS/dv| over the normalized-ray rectangle spanned by
    the box's first and last integer pixel, i.e. the quantity the pre-pi/4
    patch sum discretizes (up to local surface tilt, which projects the
    area onto the camera XY plane).
    """
    intr = spec.intrinsics
    pose = spec.pose(frame)
    u0 = max(0, int(math.floor(box.x)))
    v0 = max(0, int(math.floor(box.y)))
    u1 = min(intr.width, int(math.ceil(box.right))) - 1
    v1 = min(intr.height, int(math.ceil(box.bottom))) - 1
    x0 = (u0 - intr.p_u) / intr.f_u
    x1 = (u1 - intr.p_u) / intr.f_u
    y0 = (v0 - intr.p_v) / intr.f_v
    y1 = (v1 - intr.p_v) / intr.f_v
    R = pose.rotation()
    r1 = R.T[:, 0]
    r2 = R.T[:, 1]
    r3 = R.T[:, 2]
    cx, cy, cz = pose.position

    def integrand(XH, YH):
        d = XH[..., None] * r1 + YH[..., None] * r2 + r3
        z = _solve_depth(spec.surface, pose, XH, YH)
        px = cx + z * d[..., 0]
        py = cy + z * d[..., 1]
        gx, gy = spec.surface.grad(px, py)
        # implicit derivative of F = cz + z*dz - f(cx + z*dx, cy + z*dy)
        Fz = d[..., 2] - gx * d[..., 0] - gy * d[..., 1]
        Fu = z * (r1[2] - gx * r1[0] - gy * r1[1])
        Fv = z * (r2[2] - gx * r2[0] - gy * r2[1])
        zu = -Fu / Fz
        zv = -Fv / Fz
        # dS/du = zu * d + z * r1 ; dS/dv = zv * d + z * r2
        Su = zu[..., None] * d + z[..., None] * r1
        Sv = zv[..., None] * d + z[..., None] * r2
        cross = np.cross(Su, Sv)
        return np.linalg.norm(cross, axis=-1)

    prev = None
    for n in (16, 32, 64, 128, 256):
        val = _gauss_legendre_2d(integrand, x0, x1, y0, y1, n)
        if prev is not None and abs(val - prev) <= rel_tol * abs(val):
            return val
        prev = val
    return val
