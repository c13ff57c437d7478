"""Independent rasterizer and analytic solids used as volumetry oracles."""

import numpy as np


def ellipse_mask(a_mm, b_mm, spacing, theta_deg=0.0, pad=4):
    """Pixel-center rasterization of an ellipse; semi-axes in mm, rotation in degrees."""
    theta = np.radians(theta_deg)
    half = max(a_mm, b_mm) + pad * spacing
    n = int(np.ceil(2 * half / spacing))
    center = (n - 1) / 2.0
    r = np.arange(n)[:, None]
    c = np.arange(n)[None, :]
    y = (r - center) * spacing
    x = (c - center) * spacing
    xr = x * np.cos(theta) + y * np.sin(theta)
    yr = -x * np.sin(theta) + y * np.cos(theta)
    return (xr / a_mm) ** 2 + (yr / b_mm) ** 2 <= 1.0


def rectangle_mask(length_mm, width_mm, spacing, pad=4):
    cols = int(round(length_mm / spacing))
    rows = int(round(width_mm / spacing))
    bits = np.zeros((rows + 2 * pad, cols + 2 * pad), dtype=bool)
    bits[pad:pad + rows, pad:pad + cols] = True
    return bits


def ellipse_area(a_mm, b_mm):
    return np.pi * a_mm * b_mm


def prolate_spheroid_volume_ml(a_mm, b_mm):
    """Solid of revolution of the ellipse about its long axis: (4/3)*pi*a*b^2."""
    return (4.0 / 3.0) * np.pi * a_mm * b_mm ** 2 / 1000.0


def triaxial_ellipsoid_volume_ml(a_mm, b_mm, c_mm):
    return (4.0 / 3.0) * np.pi * a_mm * b_mm * c_mm / 1000.0


def cylinder_volume_ml(length_mm, diameter_mm):
    return np.pi / 4.0 * diameter_mm ** 2 * length_mm / 1000.0


def boundary_pixel_count(bits):
    """Pixels of the mask with at least one 4-neighbour outside it."""
    padded = np.pad(bits, 1)
    interior = (padded[:-2, 1:-1] & padded[2:, 1:-1]
                & padded[1:-1, :-2] & padded[1:-1, 2:])
    return int((bits & ~interior).sum())
