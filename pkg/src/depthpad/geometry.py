"""Closed-form camera geometry of living and spoofed face motion.

A pinhole camera watches either a real face or an attack carrier (a print or
a screen replaying a recorded face). Three facial points at different depths
move vertically; their image-plane optical flows let an observer estimate the
relative depth d1/d2 between the points. For a live face that estimate is the
true ratio. For attacks the recording camera and the realistic camera compose,
and carrier shake or carrier rotation distorts the estimate in ways computed
here in closed form.

Every quantity shares one arbitrary length unit (only ratios matter) and all
motion is restricted to the vertical axis. All functions are pure.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

# Relative slack when deciding that all three flows coincide (print signature).
# Inputs are exact closed-form simulations, so this only absorbs float noise.
EPS_FLAT = 1e-9


class InconsistentFlowError(ValueError):
    """The observed flows admit no relative-depth estimate."""


class SingularConfigError(ValueError):
    """Scene parameters cancel exactly; the requested quantity is undefined."""


class DegenerateRotationError(ValueError):
    """The viewing ray misses the rotated carrier plane."""


def _check_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class RealSceneConfig:
    """A live face in front of the camera.

    f: focal distance; z: distance from the focal point to the nearest facial
    point; d1, d2: depth offsets of the middle and far points behind the near
    point (d2 is the largest offset, so d1/d2 is in [0, 1]); dx: vertical
    displacement of the face between the two frames.
    """

    f: float
    z: float
    d1: float
    d2: float
    dx: float

    def __post_init__(self) -> None:
        for name in ("f", "z", "d1", "d2", "dx"):
            _check_finite(name, getattr(self, name))
        if self.f <= 0:
            raise ValueError(f"focal distance must be positive, got {self.f}")
        if self.z <= 0:
            raise ValueError(f"near-point distance must be positive, got {self.z}")
        if self.d2 <= 0:
            raise ValueError(f"largest depth offset must be positive, got {self.d2}")
        if not 0 <= self.d1 <= self.d2:
            raise ValueError(f"need 0 <= d1 <= d2, got d1={self.d1}, d2={self.d2}")

    @property
    def relative_depth(self) -> float:
        """True relative depth d1/d2 of the middle point."""
        return self.d1 / self.d2


@dataclass(frozen=True)
class AttackSceneConfig:
    """A recorded face shown to the realistic camera on a carrier.

    fa, za describe the recording camera (za measured to the nearest facial
    point in the recorded scene); fb, zb describe the realistic camera watching
    the carrier. dx is the facial displacement inside the recorded content
    (0 for a print), dv the vertical carrier shake per frame step, theta the
    carrier rotation angle in radians. ul1, um1, ur1 are the recording-plane
    start coordinates of the three points; only the rotation case reads them.
    """

    fa: float
    fb: float
    za: float
    zb: float
    d1: float
    d2: float
    dx: float = 0.0
    dv: float = 0.0
    theta: float = 0.0
    ul1: float = 1.0
    um1: float = 1.2
    ur1: float = 0.8

    def __post_init__(self) -> None:
        for name in ("fa", "fb", "za", "zb", "d1", "d2", "dx", "dv",
                     "theta", "ul1", "um1", "ur1"):
            _check_finite(name, getattr(self, name))
        for name in ("fa", "fb", "za", "zb"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.d2 <= 0:
            raise ValueError(f"largest depth offset must be positive, got {self.d2}")
        if not 0 <= self.d1 <= self.d2:
            raise ValueError(f"need 0 <= d1 <= d2, got d1={self.d1}, d2={self.d2}")
        if not -math.pi / 2 < self.theta < math.pi / 2:
            raise ValueError(f"theta must lie in (-pi/2, pi/2), got {self.theta}")

    @property
    def relative_depth(self) -> float:
        return self.d1 / self.d2


@dataclass(frozen=True)
class FlowObservation:
    """Signed vertical flows of the near/middle/far point projections."""

    du_l: float
    du_m: float
    du_r: float

    def __post_init__(self) -> None:
        for name in ("du_l", "du_m", "du_r"):
            _check_finite(name, getattr(self, name))


@dataclass(frozen=True)
class RelativeDepthEstimate:
    """Relative depth recovered from a flow observation.

    degenerate_flat means all flows coincide, so both estimated depths are
    zero (the print signature); ratio is None in that case and must not be
    used in arithmetic.
    """

    degenerate_flat: bool
    ratio: Optional[float]

    @classmethod
    def flat(cls) -> "RelativeDepthEstimate":
        return cls(degenerate_flat=True, ratio=None)

    @classmethod
    def of(cls, ratio: float) -> "RelativeDepthEstimate":
        return cls(degenerate_flat=False, ratio=ratio)


def project(f: float, z: float, x: float) -> float:
    """Pinhole projection u = f*x/z of a point at height x, distance z."""
    if z <= 0:
        raise ValueError(f"projection distance must be positive, got {z}")
    return f * x / z


def flow_real(cfg: RealSceneConfig) -> FlowObservation:
    """Image-plane flows of the three points for a live face moving by dx."""
    return FlowObservation(
        du_l=cfg.f * cfg.dx / cfg.z,
        du_m=cfg.f * cfg.dx / (cfg.z + cfg.d1),
        du_r=cfg.f * cfg.dx / (cfg.z + cfg.d2),
    )


def estimate_relative_depth(obs: FlowObservation,
                            eps_flat: float = EPS_FLAT) -> RelativeDepthEstimate:
    """Recover d1/d2 from the three observed flows.

    Returns the flat estimate when both flow ratios are within eps_flat of 1
    (all three flows coincide, so the scene is a plane). Raises
    InconsistentFlowError when only the denominator ratio collapses, or when
    du_m or du_r is exactly zero.
    """
    if obs.du_m == 0.0 or obs.du_r == 0.0:
        raise InconsistentFlowError(
            "du_m and du_r must be nonzero to estimate relative depth")
    num = obs.du_l / obs.du_m - 1.0
    den = obs.du_l / obs.du_r - 1.0
    if abs(den) <= eps_flat:
        if abs(num) <= eps_flat:
            return RelativeDepthEstimate.flat()
        raise InconsistentFlowError(
            "far-point flow matches near-point flow while middle does not; "
            "the estimate denominator vanishes")
    return RelativeDepthEstimate.of(num / den)


def flow_replay(cfg: AttackSceneConfig) -> FlowObservation:
    """Realistic-camera flows for a translating carrier (theta must be 0).

    The recorded motion and the carrier shake dv compose; a print attack is
    the sub-case dx = 0.
    """
    if cfg.theta != 0.0:
        raise ValueError("flow_replay models a translating carrier; theta must be 0")
    fa, fb, za, zb = cfg.fa, cfg.fb, cfg.za, cfg.zb
    return FlowObservation(
        du_l=(fa * fb * cfg.dx + za * fb * cfg.dv) / (za * zb),
        du_m=(fa * fb * cfg.dx + (za + cfg.d1) * fb * cfg.dv) / ((za + cfg.d1) * zb),
        du_r=(fa * fb * cfg.dx + (za + cfg.d2) * fb * cfg.dv) / ((za + cfg.d2) * zb),
    )


def replay_distortion_factor(cfg: AttackSceneConfig) -> float:
    """Multiplier turning the true d1/d2 into the replay-scene estimate.

    Equals 1 exactly when dv = 0 (the perfect spoofing scene) or d1 = d2.
    """
    if cfg.theta != 0.0:
        raise ValueError("distortion factor applies to a translating carrier; theta must be 0")
    den = cfg.fa * cfg.dx + (cfg.za + cfg.d1) * cfg.dv
    if den == 0.0:
        raise SingularConfigError(
            "recorded motion exactly cancels carrier shake for the middle point")
    return (cfg.fa * cfg.dx + (cfg.za + cfg.d2) * cfg.dv) / den


def closed_form_replay_ratio(cfg: AttackSceneConfig) -> float:
    """Replay-scene relative-depth estimate without simulating flows."""
    return cfg.relative_depth * replay_distortion_factor(cfg)


def map_rotated_coordinate(u: float, zb: float, theta: float) -> float:
    """Re-project a rotated-plane coordinate onto the vertical carrier plane.

    The carrier plane pivots by theta about its intersection with the optical
    axis; a material point at plane coordinate u lands on the vertical plane
    at zb*u*cos(theta) / (zb - u*sin(theta)).
    """
    if zb <= 0:
        raise ValueError(f"camera-to-carrier distance must be positive, got {zb}")
    den = zb - u * math.sin(theta)
    if den <= 0:
        raise DegenerateRotationError(
            f"rotated plane coordinate {u} at angle {theta} has no valid "
            f"intersection (zb - u*sin(theta) = {den})")
    return zb * u * math.cos(theta) / den


def _recording_flows(cfg: AttackSceneConfig) -> tuple[float, float, float]:
    """Recording-plane flows of the three points inside the recorded content."""
    return (
        cfg.fa * cfg.dx / cfg.za,
        cfg.fa * cfg.dx / (cfg.za + cfg.d1),
        cfg.fa * cfg.dx / (cfg.za + cfg.d2),
    )


def flow_rotated(cfg: AttackSceneConfig) -> FlowObservation:
    """Realistic-camera flows for a carrier rotated by cfg.theta.

    Each recording-plane flow is mapped through the rotated plane as the
    difference of map_rotated_coordinate at the start and end coordinates
    (ul1/um1/ur1 and their displaced positions), then scaled onto the
    realistic image plane.
    """
    flows = _recording_flows(cfg)
    starts = (cfg.ul1, cfg.um1, cfg.ur1)
    mapped = []
    for u1, du in zip(starts, flows):
        u2 = u1 + du
        mapped.append(
            map_rotated_coordinate(u2, cfg.zb, cfg.theta)
            - map_rotated_coordinate(u1, cfg.zb, cfg.theta))
    scale = cfg.fb / cfg.zb
    return FlowObservation(*(scale * m for m in mapped))


def rotation_beta_factors(cfg: AttackSceneConfig) -> tuple[float, float]:
    """Distortion factors (beta1, beta2) introduced by carrier rotation.

    beta1 scales the near/middle flow ratio, beta2 the near/far one; both are
    products of the per-endpoint intersection denominators. With theta = 0
    both collapse to exactly 1.
    """
    s = math.sin(cfg.theta)
    flows = _recording_flows(cfg)
    u = {
        "l": (cfg.ul1, cfg.ul1 + flows[0]),
        "m": (cfg.um1, cfg.um1 + flows[1]),
        "r": (cfg.ur1, cfg.ur1 + flows[2]),
    }
    den = {}
    for key, (u1, u2) in u.items():
        a = cfg.zb - u1 * s
        b = cfg.zb - u2 * s
        if a <= 0 or b <= 0:
            raise DegenerateRotationError(
                f"point {key} leaves the valid rotation domain (factors {a}, {b})")
        den[key] = a * b
    return den["m"] / den["l"], den["r"] / den["l"]


def closed_form_rotated_ratio(cfg: AttackSceneConfig) -> float:
    """Rotated-carrier relative-depth estimate without simulating flows."""
    beta1, beta2 = rotation_beta_factors(cfg)
    num = (cfg.d1 / cfg.za + 1.0) * beta1 - 1.0
    den = (cfg.d2 / cfg.za + 1.0) * beta2 - 1.0
    if den == 0.0:
        raise SingularConfigError("rotation factors cancel the estimate denominator")
    return num / den


@dataclass(frozen=True)
class FrameRecord:
    """One frame step of a simulated sequence (frame indices start at 1)."""

    frame: int
    observation: FlowObservation
    estimate: RelativeDepthEstimate
    closed_form_ratio: Optional[float]


SceneConfig = RealSceneConfig | AttackSceneConfig


def simulate_sequence(cfg: SceneConfig, n_frames: int,
                      dv_schedule: Optional[Sequence[float]] = None
                      ) -> list[FrameRecord]:
    """Per-frame relative-depth estimates over an n_frames video.

    n_frames frames yield n_frames - 1 flow observations. A dv schedule (one
    shake value per frame step) applies only to translating attack carriers;
    real scenes and rotated carriers reject it. Rotated carriers advance their
    recording-plane coordinates by each step's recording flows, so their
    estimates drift over time while a real scene's series stays constant.
    """
    if n_frames < 2:
        raise ValueError(f"a sequence needs at least 2 frames, got {n_frames}")
    n_steps = n_frames - 1

    if isinstance(cfg, RealSceneConfig):
        if dv_schedule is not None:
            raise ValueError("dv schedules apply to attack scenes only")
        records = []
        for t in range(n_steps):
            obs = flow_real(cfg)
            records.append(FrameRecord(t + 1, obs, estimate_relative_depth(obs),
                                       cfg.relative_depth))
        return records

    if cfg.theta != 0.0:
        if dv_schedule is not None and any(v != 0.0 for v in dv_schedule):
            raise ValueError("a rotated carrier with nonzero shake is not modeled")
        records = []
        frame_cfg = cfg
        for t in range(n_steps):
            obs = flow_rotated(frame_cfg)
            records.append(FrameRecord(t + 1, obs, estimate_relative_depth(obs),
                                       closed_form_rotated_ratio(frame_cfg)))
            dul, dum, dur = _recording_flows(frame_cfg)
            frame_cfg = replace(frame_cfg, ul1=frame_cfg.ul1 + dul,
                                um1=frame_cfg.um1 + dum, ur1=frame_cfg.ur1 + dur)
        return records

    if dv_schedule is None:
        dv_schedule = [cfg.dv] * n_steps
    if len(dv_schedule) != n_steps:
        raise ValueError(
            f"dv schedule has {len(dv_schedule)} entries for {n_steps} frame steps")
    records = []
    for t, dv in enumerate(dv_schedule):
        frame_cfg = replace(cfg, dv=dv)
        obs = flow_replay(frame_cfg)
        est = estimate_relative_depth(obs)
        closed = None if frame_cfg.dx == 0.0 else closed_form_replay_ratio(frame_cfg)
        records.append(FrameRecord(t + 1, obs, est, closed))
    return records


SWEEP_CSV_COLUMNS = ("scene_type", "frame", "du_l", "du_m", "du_r",
                     "ratio", "degenerate_flat", "closed_form_ratio")


def write_sweep_csv(path, records_by_scene: dict[str, Sequence[FrameRecord]]) -> None:
    """Serialize sweep results; floats use repr so parsing round-trips exactly."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_CSV_COLUMNS)
        for scene_type, records in records_by_scene.items():
            for rec in records:
                est = rec.estimate
                writer.writerow([
                    scene_type,
                    rec.frame,
                    repr(float(rec.observation.du_l)),
                    repr(float(rec.observation.du_m)),
                    repr(float(rec.observation.du_r)),
                    "" if est.ratio is None else repr(float(est.ratio)),
                    "true" if est.degenerate_flat else "false",
                    "" if rec.closed_form_ratio is None
                    else repr(float(rec.closed_form_ratio)),
                ])


def read_sweep_csv(path) -> list[dict]:
    """Parse a sweep CSV back into typed row dicts."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != SWEEP_CSV_COLUMNS:
            raise ValueError(f"unexpected sweep CSV header: {reader.fieldnames}")
        for raw in reader:
            rows.append({
                "scene_type": raw["scene_type"],
                "frame": int(raw["frame"]),
                "du_l": float(raw["du_l"]),
                "du_m": float(raw["du_m"]),
                "du_r": float(raw["du_r"]),
                "ratio": None if raw["ratio"] == "" else float(raw["ratio"]),
                "degenerate_flat": raw["degenerate_flat"] == "true",
                "closed_form_ratio": (None if raw["closed_form_ratio"] == ""
                                      else float(raw["closed_form_ratio"])),
            })
    return rows
