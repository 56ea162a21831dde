"""Stability regions and damping statistics of RKL and RKC schemes.

The amplification factor is obtained by running the stage recursion on the
scalar test problem ``u' = lambda u`` with ``z = k lambda``, so a scan checks
exactly what :func:`rklpricer.rkl.rkl_step` does.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .rkl import rkc_coefficients, rkl_coefficients, rkl_step

DEFAULT_RESOLUTION = (2000, 1000)


class WindowTooSmallError(ValueError):
    """The stability region reaches the edge of the scanned window."""


def coefficients(scheme: str, s: int, eps: float):
    if scheme == "RKL":
        return rkl_coefficients(s, eps)
    if scheme == "RKC":
        return rkc_coefficients(s, eps)
    raise ValueError(f"unknown scheme {scheme!r}")


def amplification(scheme: str, s: int, eps: float, z):
    """Amplification factor ``R(z)``; ``z`` may be a scalar or an array."""
    coeffs = coefficients(scheme, s, eps)
    z = np.asarray(z, dtype=complex)
    out = rkl_step(coeffs, lambda v: z * v, 1.0, np.ones_like(z))
    return out if out.ndim else complex(out)


@dataclass
class RegionScan:
    scheme: str
    s: int
    eps: float
    window: tuple[float, float, float, float]
    nx: int
    ny: int
    damping: np.ndarray
    stable: np.ndarray

    @property
    def re(self) -> np.ndarray:
        re_min, re_max = self.window[:2]
        dx = (re_max - re_min) / self.nx
        return re_min + dx * (np.arange(self.nx) + 0.5)

    @property
    def im(self) -> np.ndarray:
        im_min, im_max = self.window[2:]
        dy = (im_max - im_min) / self.ny
        return im_min + dy * (np.arange(self.ny) + 0.5)

    @property
    def cell_area(self) -> float:
        re_min, re_max, im_min, im_max = self.window
        return (re_max - re_min) / self.nx * (im_max - im_min) / self.ny

    def write_csv(self, path) -> None:
        """Raster as ``re,im,damping,stable``, row-major (imaginary part outer)."""
        re, im = self.re, self.im
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["re", "im", "damping", "stable"])
            for j in range(self.ny):
                for i in range(self.nx):
                    writer.writerow([repr(float(re[i])), repr(float(im[j])), repr(float(self.damping[j, i])), int(self.stable[j, i])])


def scan(scheme: str, s: int, eps: float, window, nx: int, ny: int) -> RegionScan:
    """Evaluate ``|R(z)|`` at the cell centres of ``window = (re_min, re_max, im_min, im_max)``."""
    re_min, re_max, im_min, im_max = window
    if not (re_min < re_max and im_min < im_max):
        raise ValueError("empty window")
    sc = RegionScan(scheme, s, float(eps), tuple(map(float, window)), nx, ny, None, None)
    z = sc.re[None, :] + 1j * sc.im[:, None]
    damping = np.abs(amplification(scheme, s, eps, z))
    sc.damping = damping
    sc.stable = damping <= 1.0
    return sc


def real_extent(scheme: str, s: int, eps: float) -> float:
    """Length of the real stability interval, ``(1 + w0) / w1``."""
    return coefficients(scheme, s, eps).stability_bound


def auto_window(scheme: str, s: int, eps: float, coarse=(400, 200)):
    """Window covering the whole region.

    Starts from real part ``[-1.1 beta, 0.1]`` with ``beta = (1 + w0) / w1``
    and grows the left edge and the imaginary half-height until no stable
    coarse cell touches them (large shifts push the region past ``-beta``).
    """
    beta = real_extent(scheme, s, eps)
    re_min, re_max = -1.1 * beta, 0.1
    half = max(1.0, 0.02 * beta)
    for _ in range(60):
        sc = scan(scheme, s, eps, (re_min, re_max, -half, half), *coarse)
        grow_left = sc.stable[:, 0].any()
        grow_up = sc.stable[0].any() or sc.stable[-1].any()
        if not (grow_left or grow_up):
            return re_min, re_max, -1.1 * half, 1.1 * half
        if grow_left:
            re_min *= 1.25
        if grow_up:
            half *= 1.5
    raise WindowTooSmallError("could not bound the stability region")


def scan_region(scheme: str, s: int, eps: float, window=None, resolution=DEFAULT_RESOLUTION) -> RegionScan:
    if window is None:
        window = auto_window(scheme, s, eps)
    return scan(scheme, s, eps, window, *resolution)


def region_stats(sc: RegionScan, origin_radius: float | None = None) -> tuple[float, float]:
    """Area of the stability region and mean ``|R|`` over it.

    Raises :class:`WindowTooSmallError` when stable cells touch the window
    edge away from the origin.
    """
    if origin_radius is None:
        origin_radius = 0.02 * (sc.window[1] - sc.window[0])
    re, im = sc.re, sc.im
    edge = np.zeros_like(sc.stable)
    edge[0, :] = edge[-1, :] = True
    edge[:, 0] = edge[:, -1] = True
    far = np.abs(re[None, :] + 1j * im[:, None]) > origin_radius
    if np.any(sc.stable & edge & far):
        raise WindowTooSmallError("stability region touches the scan boundary")
    count = int(sc.stable.sum())
    area = count * sc.cell_area
    avg = float(sc.damping[sc.stable].mean()) if count else float("nan")
    return area, avg


def stats_record(sc: RegionScan, reference_area: float | None = None) -> dict:
    area, avg = region_stats(sc)
    return {
        "scheme": sc.scheme,
        "s": sc.s,
        "eps": sc.eps,
        "area": area,
        "area_ratio": area / reference_area if reference_area else 1.0,
        "avg_damping": avg,
    }


def table_row(scheme: str, s: int, eps: float, resolution=DEFAULT_RESOLUTION) -> dict:
    """Statistics with the area relative to unshifted RKL at the same ``s``."""
    ref_area, _ = region_stats(scan_region("RKL", s, 0.0, resolution=resolution))
    return stats_record(scan_region(scheme, s, eps, resolution=resolution), ref_area)


def stats_json(record: dict) -> str:
    return json.dumps(record, sort_keys=True)
