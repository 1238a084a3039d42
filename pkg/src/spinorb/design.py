"""Metasurface layout generation, geometric-phase masks, and diffraction checks.

The element is an azimuthal orientation pattern theta(r, phi) = winding *
phi / 2 realized by blocks of parallel nanorods. A circular polarization
acquires the spin-dependent phase -2 * spin * theta(x, y), so the mask for
one spin is a phase vortex whose charge is ``-spin * winding``. The far
field and an azimuthal mode decomposition verify the imprinted OAM.

Lengths are nanometers throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

#: assumed rod length as a fraction of the block size (frozen convention)
ROD_LENGTH_FRACTION = 0.9


@dataclass(frozen=True)
class LayoutSpec:
    """Geometry of the nanoantenna array."""

    winding: int = 1
    aperture_diameter: float = 200_000.0
    block_size: float = 700.0
    rod_width: float = 105.0
    rod_depth: float = 300.0
    rod_pitch: float = 233.0

    def __post_init__(self):
        for name in ("aperture_diameter", "block_size", "rod_width", "rod_depth", "rod_pitch"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.block_size < self.rod_pitch:
            raise ValueError("block_size must be at least rod_pitch")
        if self.aperture_diameter < 10 * self.block_size:
            raise ValueError("aperture must be much larger than one block")


def orientation_field(x: float, y: float, winding: int) -> float:
    """Nanoantenna orientation theta = winding * atan2(y, x) / 2, modulo pi.

    The azimuth is singular at the exact origin; callers offset their grids
    by half a pixel so they never sample it.
    """
    if x == 0.0 and y == 0.0:
        raise ValueError("orientation undefined at the aperture center")
    return (winding * math.atan2(y, x) / 2.0) % math.pi


def _rod_offsets(spec: LayoutSpec, theta: float):
    """Perpendicular offsets of the rods that fit in one block at angle theta.

    The nominal count is floor(block/pitch); rods whose rotated footprint
    would leave the block square are dropped symmetrically, which is what
    makes the rod count orientation-dependent.
    """
    count = int(spec.block_size // spec.rod_pitch)
    offsets = (np.arange(count) - (count - 1) / 2.0) * spec.rod_pitch
    half_len = 0.5 * ROD_LENGTH_FRACTION * spec.block_size
    half_w = 0.5 * spec.rod_width
    half_b = 0.5 * spec.block_size
    c, s = abs(math.cos(theta)), abs(math.sin(theta))
    kept = []
    for d in offsets:
        reach = abs(d) + half_w
        if half_len * c + reach * s <= half_b and half_len * s + reach * c <= half_b:
            kept.append(d)
    return kept


def generate_layout(spec: LayoutSpec):
    """Rod positions and orientations tiling the aperture disk.

    Blocks sit on a ``block_size`` grid with centers offset half a block from
    the aperture center; a block is kept when its center lies inside the
    disk. All rods in a block share the block-center orientation. Returns an
    (n, 3) float array of rows ``(x_nm, y_nm, angle_rad)`` sorted by (y, x).
    """
    b = spec.block_size
    radius = 0.5 * spec.aperture_diameter
    half = int(math.ceil(radius / b)) + 1
    rows = []
    for j in range(-half, half):
        cy = (j + 0.5) * b
        for i in range(-half, half):
            cx = (i + 0.5) * b
            if math.hypot(cx, cy) > radius:
                continue
            theta = orientation_field(cx, cy, spec.winding)
            nx, ny = -math.sin(theta), math.cos(theta)
            for d in _rod_offsets(spec, theta):
                rows.append((cx + d * nx, cy + d * ny, theta))
    rows.sort(key=lambda r: (r[1], r[0]))
    return np.array(rows)


def layout_to_csv(rows) -> str:
    """Layout CSV with integer-nm positions and milliradian angles."""
    lines = ["x_nm,y_nm,angle_mrad"]
    for x, y, theta in rows:
        lines.append(f"{int(round(x))},{int(round(y))},{1000.0 * theta:.3f}")
    return "\n".join(lines) + "\n"


def write_layout(path_csv, spec: LayoutSpec, rows):
    """Write the layout CSV plus a sidecar JSON recording the geometry.

    The sidecar pins the conventions a reader needs to reconstruct rod
    footprints, in particular the assumed rod length (0.9 x block size).
    """
    with open(path_csv, "w") as fh:
        fh.write(layout_to_csv(rows))
    sidecar = {
        "winding": spec.winding,
        "aperture_diameter_nm": spec.aperture_diameter,
        "block_size_nm": spec.block_size,
        "rod_width_nm": spec.rod_width,
        "rod_depth_nm": spec.rod_depth,
        "rod_pitch_nm": spec.rod_pitch,
        "rod_length_nm": ROD_LENGTH_FRACTION * spec.block_size,
        "rod_count": len(rows),
    }
    with open(str(path_csv) + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")


class PhaseMask:
    """Pixelated spin-dependent phase profile over a circular aperture."""

    def __init__(self, values, opaque, pixel_pitch: float, spin: int, winding: int,
                 aperture_radius: float):
        v = np.asarray(values, dtype=float) % TWO_PI
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("mask grid must be square")
        self.values = v
        self.opaque = np.asarray(opaque, dtype=bool)
        if self.opaque.shape != v.shape:
            raise ValueError("opacity grid must match the phase grid")
        self.pixel_pitch = float(pixel_pitch)
        self.spin = int(spin)
        self.winding = int(winding)
        self.aperture_radius = float(aperture_radius)

    @property
    def grid_n(self) -> int:
        return self.values.shape[0]

    def to_levels(self) -> np.ndarray:
        """Quantize phases to 16-bit levels: level k encodes 2*pi*k/65536."""
        levels = np.floor(self.values / TWO_PI * 65536.0 + 0.5).astype(np.int64) % 65536
        levels[self.opaque] = 0
        return levels.astype(np.uint16)


def _pixel_coords(grid_n: int, pixel_pitch: float):
    """Pixel-center coordinates, offset half a pixel so the origin is excluded."""
    axis = (np.arange(grid_n) - grid_n / 2 + 0.5) * pixel_pitch
    return np.meshgrid(axis, axis)


def default_pixel_pitch(spec: LayoutSpec, grid_n: int) -> float:
    """Aperture spans 87.5% of the grid, leaving a 12.5% zero-padding margin."""
    return spec.aperture_diameter / (0.875 * grid_n)


def phase_mask(spec: LayoutSpec, spin: int, grid_n: int = 1024,
               block_quantized: bool = False) -> PhaseMask:
    """Render the geometric phase -2 * spin * theta(x, y) on a square grid.

    With ``block_quantized`` the orientation is sampled at nanorod-block
    centers instead of pixel centers, reproducing the staircase phase of the
    fabricated element.
    """
    if grid_n < 64:
        raise ValueError("grid_n must be at least 64")
    if spin not in (+1, -1):
        raise ValueError("spin must be +1 or -1")
    pitch = default_pixel_pitch(spec, grid_n)
    xx, yy = _pixel_coords(grid_n, pitch)
    if block_quantized:
        b = spec.block_size
        xq = (np.floor(xx / b) + 0.5) * b
        yq = (np.floor(yy / b) + 0.5) * b
        theta = spec.winding * np.arctan2(yq, xq) / 2.0
    else:
        theta = spec.winding * np.arctan2(yy, xx) / 2.0
    values = (-2.0 * spin * theta) % TWO_PI
    radius = 0.5 * spec.aperture_diameter
    opaque = xx * xx + yy * yy > radius * radius
    return PhaseMask(values, opaque, pitch, spin, spec.winding, radius)


def gaussian_beam(grid_n: int, pixel_pitch: float, waist: float) -> np.ndarray:
    """Amplitude exp(-r^2 / waist^2) on the mask grid (1/e^2 intensity radius)."""
    if waist < 4 * pixel_pitch:
        raise ValueError("beam waist under 4 pixels is unresolved")
    xx, yy = _pixel_coords(grid_n, pixel_pitch)
    return np.exp(-(xx * xx + yy * yy) / (waist * waist))


def transmitted_field(mask: PhaseMask, input_beam: str = "gaussian",
                      waist: float | None = None) -> np.ndarray:
    """Complex field just after the mask: beam amplitude x e^{i phase} x aperture."""
    if input_beam == "gaussian":
        w = waist if waist is not None else 0.5 * mask.aperture_radius
        if w >= mask.aperture_radius:
            raise ValueError("waist must be smaller than the aperture radius")
        amp = gaussian_beam(mask.grid_n, mask.pixel_pitch, w)
    elif input_beam == "uniform":
        amp = np.ones((mask.grid_n, mask.grid_n))
    else:
        raise ValueError("input_beam must be 'gaussian' or 'uniform'")
    field = amp * np.exp(1j * mask.values)
    field[mask.opaque] = 0.0
    return field


def far_field(mask: PhaseMask, input_beam: str = "gaussian",
              waist: float | None = None) -> np.ndarray:
    """Far-field intensity: |centered unitary DFT of the transmitted field|^2.

    The unitary normalization conserves power, so the output sums to the
    transmitted (input) power.
    """
    field = transmitted_field(mask, input_beam, waist)
    spectrum = np.fft.fftshift(np.fft.fft2(field, norm="ortho"))
    return np.abs(spectrum) ** 2


def oam_spectrum(field: np.ndarray, radius: float, pixel_pitch: float = 1.0,
                 l_max: int = 10, n_samples: int = 2048):
    """Azimuthal mode powers of a complex field on a sampling circle.

    Interpolates the field on a circle of physical ``radius``, Fourier
    transforms over the azimuth, and returns the power fraction per index
    ``l`` in [-l_max, l_max] as a dict. Fractions are relative to the total
    power on the circle and sum to at most 1; the remainder sits in higher
    orders.
    """
    n = field.shape[0]
    if field.ndim != 2 or field.shape[1] != n:
        raise ValueError("field grid must be square")
    r_px = radius / pixel_pitch
    center = n / 2 - 0.5
    if r_px <= 0 or center - r_px < 1 or center + r_px > n - 2:
        raise ValueError("sampling circle exits the grid")
    phi = np.linspace(0.0, TWO_PI, n_samples, endpoint=False)
    cols = center + r_px * np.cos(phi)
    rows = center + r_px * np.sin(phi)
    samples = _bilinear(field, rows, cols)
    coeffs = np.fft.fft(samples) / n_samples
    total = float(np.sum(np.abs(coeffs) ** 2))
    if total <= 0:
        raise ValueError("field vanishes on the sampling circle")
    powers = {}
    for l in range(-l_max, l_max + 1):
        powers[l] = float(np.abs(coeffs[l % n_samples]) ** 2 / total)
    return powers


def _bilinear(grid: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    r0 = np.floor(rows).astype(int)
    c0 = np.floor(cols).astype(int)
    fr = rows - r0
    fc = cols - c0
    return (
        grid[r0, c0] * (1 - fr) * (1 - fc)
        + grid[r0 + 1, c0] * fr * (1 - fc)
        + grid[r0, c0 + 1] * (1 - fr) * fc
        + grid[r0 + 1, c0 + 1] * fr * fc
    )


def unwrapped_azimuthal_winding(mask: PhaseMask, radius: float | None = None,
                                n_samples: int = 3600) -> int:
    """Net phase winding (integer multiple of 2*pi) around an azimuth loop.

    Accumulates principal-value phase steps between consecutive samples on a
    circle (default radius: half the aperture radius), so the result is the
    exact integer charge as long as steps stay below pi.
    """
    r = radius if radius is not None else 0.5 * mask.aperture_radius
    phi = np.linspace(0.0, TWO_PI, n_samples, endpoint=False)
    center = mask.grid_n / 2 - 0.5
    r_px = r / mask.pixel_pitch
    cols = center + r_px * np.cos(phi)
    rows = center + r_px * np.sin(phi)
    vals = _bilinear(np.exp(1j * mask.values), rows, cols)
    steps = np.angle(vals * np.conj(np.roll(vals, 1)))
    return int(round(steps.sum() / TWO_PI))


# ---------------------------------------------------------------------------
# file formats

def write_pgm16(path, levels: np.ndarray):
    """16-bit binary PGM (big-endian sample order per the format)."""
    levels = np.asarray(levels)
    if levels.dtype != np.uint16:
        raise ValueError("levels must be uint16")
    h, w = levels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode())
        fh.write(levels.astype(">u2").tobytes())


def read_pgm16(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM file")
    w, h = (int(v) for v in parts[1].split())
    if int(parts[2]) != 65535:
        raise ValueError("expected a 16-bit PGM")
    return np.frombuffer(parts[3], dtype=">u2", count=w * h).reshape(h, w).astype(np.uint16)


def write_mask(path_pgm, mask: PhaseMask):
    """Write a mask PGM plus its aperture sidecar JSON (same path + '.json')."""
    write_pgm16(path_pgm, mask.to_levels())
    n = mask.grid_n
    sidecar = {
        "center_px": [n / 2 - 0.5, n / 2 - 0.5],
        "radius_px": mask.aperture_radius / mask.pixel_pitch,
        "pixel_pitch_nm": mask.pixel_pitch,
        "spin": mask.spin,
        "winding": mask.winding,
    }
    with open(str(path_pgm) + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")


def read_mask(path_pgm) -> PhaseMask:
    levels = read_pgm16(path_pgm)
    with open(str(path_pgm) + ".json") as fh:
        sidecar = json.load(fh)
    n = levels.shape[0]
    xx, yy = np.meshgrid(np.arange(n, dtype=float), np.arange(n, dtype=float))
    cx, cy = sidecar["center_px"]
    opaque = (xx - cx) ** 2 + (yy - cy) ** 2 > sidecar["radius_px"] ** 2
    values = levels.astype(float) / 65536.0 * TWO_PI
    pitch = sidecar["pixel_pitch_nm"]
    return PhaseMask(values, opaque, pitch, sidecar.get("spin", +1),
                     sidecar.get("winding", 0), sidecar["radius_px"] * pitch)


def write_intensity_pgm(path, intensity: np.ndarray):
    """Linear-scale intensity PGM; the maximum maps to 65535."""
    arr = np.asarray(intensity, dtype=float)
    peak = arr.max()
    if peak <= 0:
        levels = np.zeros_like(arr, dtype=np.uint16)
    else:
        levels = np.floor(arr / peak * 65535.0 + 0.5).astype(np.uint16)
    write_pgm16(path, levels)
