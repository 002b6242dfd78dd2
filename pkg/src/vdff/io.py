"""File formats: PFM depth maps, PNG previews, CSV rows and key=value manifests."""
from __future__ import annotations

import csv
import platform
import re
from pathlib import Path

import numpy as np
from PIL import Image as PILImage


def write_pfm(path, data: np.ndarray) -> None:
    """Write a single-channel little-endian 32-bit float PFM (rows stored bottom-up)."""
    data = np.asarray(data, dtype="<f4")
    if data.ndim != 2:
        raise ValueError("only single-channel PFM is supported")
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(np.ascontiguousarray(data[::-1]).tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    # header: 3 whitespace-separated tokens lines, then binary payload
    m = re.match(rb"(P[fF])\s+(\d+)\s+(\d+)\s+(\S+)\s", raw)
    if m is None:
        raise ValueError(f"{path} is not a PFM file")
    kind, w, h, scale = m.group(1), int(m.group(2)), int(m.group(3)), float(m.group(4))
    channels = 3 if kind == b"PF" else 1
    dtype = "<f4" if scale < 0 else ">f4"
    data = np.frombuffer(raw, dtype=dtype, count=w * h * channels, offset=m.end())
    shape = (h, w, channels) if channels == 3 else (h, w)
    return data.reshape(shape)[::-1].astype(np.float64)


def write_gray_png(path, data: np.ndarray) -> None:
    """Save an image with values in [0, 1] (``(H, W)`` or ``(H, W, C)``) as 8-bit PNG."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 3 and data.shape[2] == 1:
        data = data[..., 0]
    PILImage.fromarray(np.round(np.clip(data, 0.0, 1.0) * 255.0).astype(np.uint8)).save(path)


def write_depth_png(path, depth: np.ndarray, vmin: float = 0.0, vmax: float = 1.0) -> None:
    """Colour-mapped depth preview: blue is near (front focus), red is far."""
    from matplotlib import colormaps

    scaled = np.clip((np.asarray(depth, dtype=np.float64) - vmin) / (vmax - vmin), 0.0, 1.0)
    rgba = colormaps["jet"](scaled)
    PILImage.fromarray(np.round(rgba[..., :3] * 255.0).astype(np.uint8)).save(path)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def read_keyvalue(path) -> dict[str, str]:
    """Parse a flat ``key=value`` text file; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def write_manifest(path, params: dict) -> None:
    """Write effective run parameters plus library versions as sorted ``key=value`` lines."""
    import numba
    import scipy

    from . import __version__

    entries = dict(params)
    entries.update({
        "version.vdff": __version__,
        "version.numpy": np.__version__,
        "version.scipy": scipy.__version__,
        "version.numba": numba.__version__,
        "version.python": platform.python_version(),
    })
    with open(path, "w") as fh:
        for key in sorted(entries):
            fh.write(f"{key}={entries[key]}\n")
