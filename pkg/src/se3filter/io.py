"""Text formats: observation blocks, KITTI-style pose files, CSV reports, config.

Floats are written with ``repr`` (shortest round-trip decimal), so every
writer/parser pair round-trips bit-exactly.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .filter import FilterConfig, ObservationBatch, weight_s
from .liegroup import check_pose


class DataError(ValueError):
    """Malformed data file (CLI exit code 3)."""


class ConfigError(ValueError):
    """Bad or incomplete configuration (CLI exit code 2)."""


def atomic_write(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt(x) -> str:
    return repr(float(x))


# -- poses -----------------------------------------------------------------

def format_poses(poses) -> str:
    lines = []
    for E in poses:
        lines.append(" ".join(fmt(v) for v in np.asarray(E)[:3, :].ravel()))
    return "\n".join(lines) + "\n"


def parse_poses(text: str, source: str = "<poses>") -> list:
    poses = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 12:
            raise DataError(f"{source}:{lineno}: expected 12 values, got {len(parts)}")
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            raise DataError(f"{source}:{lineno}: non-numeric value") from None
        E = np.eye(4)
        E[:3, :] = np.reshape(vals, (3, 4))
        try:
            check_pose(E, tol=1e-6)
        except ValueError as exc:
            raise DataError(f"{source}:{lineno}: {exc}") from None
        poses.append(E)
    return poses


def write_poses(path, poses) -> None:
    atomic_write(path, format_poses(poses))


def read_poses(path) -> list:
    return parse_poses(Path(path).read_text(), str(path))


def compose(increments) -> list:
    """Absolute poses relative to frame 0 (identity first) from per-frame increments."""
    poses = [np.eye(4)]
    for E in increments:
        poses.append(poses[-1] @ E)
    return poses


def increments(poses) -> list:
    from .liegroup import inverse

    return [inverse(a) @ b for a, b in zip(poses[:-1], poses[1:])]


# -- observations ----------------------------------------------------------

def format_observations(batches) -> str:
    out = []
    for b in batches:
        if b.x is None or b.d is None:
            raise ValueError("batch lacks image coordinates and depths")
        out.append(f"frame {int(b.frame)} {len(b)}")
        for (x1, x2), d, (y1, y2, _) in zip(b.x, b.d, b.y):
            out.append(" ".join(fmt(v) for v in (x1, x2, d, y1, y2)))
    return "\n".join(out) + "\n"


def parse_observations(text: str, source: str = "<obs>") -> list:
    lines = text.splitlines()
    batches = []
    i = 0
    while i < len(lines):
        lineno = i + 1
        head = lines[i].split()
        i += 1
        if not head:
            continue
        if len(head) != 3 or head[0] != "frame":
            raise DataError(f"{source}:{lineno}: expected 'frame <index> <n>'")
        try:
            frame, n = int(head[1]), int(head[2])
        except ValueError:
            raise DataError(f"{source}:{lineno}: bad frame header") from None
        if n <= 0:
            raise DataError(f"{source}:{lineno}: frame {frame} has no observations")
        rows = []
        for _ in range(n):
            if i >= len(lines):
                raise DataError(f"{source}:{i + 1}: unexpected end of file in frame {frame}")
            parts = lines[i].split()
            i += 1
            if len(parts) != 5:
                raise DataError(f"{source}:{i}: expected 5 values 'x1 x2 d y1 y2'")
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                raise DataError(f"{source}:{i}: non-numeric value") from None
        a = np.array(rows)
        if np.any(~(a[:, 2] > 0)):
            raise DataError(f"{source}: frame {frame} has a non-positive depth")
        batches.append(ObservationBatch.from_image(a[:, :2], a[:, 2], a[:, 3:5], frame))
    return batches


def write_observations(path, batches) -> None:
    atomic_write(path, format_observations(batches))


def read_observations(path) -> list:
    return parse_observations(Path(path).read_text(), str(path))


# -- csv -------------------------------------------------------------------

def format_csv(header, rows) -> str:
    out = [",".join(header)]
    for row in rows:
        out.append(",".join(v if isinstance(v, str) else
                            str(v) if isinstance(v, (int, np.integer)) else fmt(v) for v in row))
    return "\n".join(out) + "\n"


# -- config ----------------------------------------------------------------

FILTER_KEYS = ("alpha", "s1", "s2", "q", "p0", "h", "substeps", "outlier_quantile", "symmetrize_p")
SIM_KEYS = ("seed", "sigma", "frames", "points", "depth_min", "depth_max", "discontinuity_frames")
OPTIONAL_KEYS = ("p0_matrix", "psd_hessian", "stability_limit")


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _frames(s: str) -> tuple:
    s = s.strip()
    if s.lower() in ("", "none"):
        return ()
    return tuple(int(p) for p in s.replace(",", " ").split())


CONVERTERS = {
    "alpha": float, "s1": float, "s2": float, "q": float, "p0": float, "h": float,
    "substeps": int, "outlier_quantile": float, "symmetrize_p": _bool,
    "seed": int, "sigma": float, "frames": int, "points": int,
    "depth_min": float, "depth_max": float, "discontinuity_frames": _frames,
    "p0_matrix": str, "psd_hessian": _bool, "stability_limit": float,
}

DEFAULTS = {
    "alpha": 0.0, "s1": 1e-3, "s2": 1e-6, "q": 0.1, "p0": 1.0,
    "h": 1e-3, "substeps": 1000, "outlier_quantile": 0.8, "symmetrize_p": False,
    "seed": 0, "sigma": 0.0, "frames": 50, "points": 50,
    "depth_min": 2.0, "depth_max": 50.0, "discontinuity_frames": (21, 31),
    "p0_matrix": None, "psd_hessian": True, "stability_limit": 1.0,
}


def convert(key: str, raw) -> object:
    if key not in CONVERTERS:
        raise ConfigError(f"unknown config key: {key}")
    if not isinstance(raw, str):
        return raw
    try:
        return CONVERTERS[key](raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for config key {key}: {exc}") from None


def parse_config(text: str, required=FILTER_KEYS + SIM_KEYS) -> dict:
    """Parse ``key = value`` lines; every key in ``required`` must be present."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, _, value = (s.strip() for s in line.partition("="))
        out[key] = convert(key, value)
    for key in required:
        if key not in out:
            raise ConfigError(f"missing config key: {key}")
    return out


def read_config(path, required=FILTER_KEYS + SIM_KEYS) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, required)


def filter_config(values: dict) -> FilterConfig:
    """Build a FilterConfig from a flat settings dict (S and Q from s1, s2, q)."""
    P0 = None
    if values.get("p0_matrix"):
        try:
            P0 = np.loadtxt(values["p0_matrix"]).reshape(6, 6)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read p0_matrix: {exc}") from None
    try:
        return FilterConfig(
            alpha=values["alpha"],
            S=weight_s(values["s1"], values["s2"]),
            Q=values["q"] * np.eye(3),
            p0_scale=values["p0"],
            h=values["h"],
            substeps=values["substeps"],
            outlier_quantile=values["outlier_quantile"],
            symmetrize_p=values["symmetrize_p"],
            P0=P0,
            psd_hessian=values["psd_hessian"],
            stability_limit=values["stability_limit"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


@dataclass
class FrameRecord:
    frame: int
    mean_residual: float
    n_used_points: int
    rot_err_deg: float | None = None
    trans_err_m: float | None = None
