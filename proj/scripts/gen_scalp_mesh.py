#!/usr/bin/env python3
"""Regenerates data/scalp_mesh.csv, the bundled dense scalp electrode mesh.

Layout model: an azimuthal-equidistant ("flat disk") projection of an
idealized spherical head, vertex Cz at the origin. The radial coordinate is
the great-circle arc fraction from the vertex, normalized so the
nasion-inion / preauricular ring (Nz, T9, Iz, T10) sits at radius 1.0 and
the classic circumferential ring (Fpz, T7, Oz, T8, ...) at radius 0.8.

Electrodes follow the proportional grid of the extended 10-10/10-5 naming
systems: rows advance front-to-back in 5% steps of the midline arc, columns
advance ear-to-ear in 5% steps along per-row contours (circular arcs through
the two ring anchors and the midline point of the row). Intermediate "h"
positions sit between a numbered position and its inward neighbor. Earlobe
(A1/A2) and mastoid (M1/M2) electrodes sit just outside the head circle.
Coordinates are finally normalized so every point lies inside the unit disk.

The exact roster (348 names) is this project's own; it covers all standard
10-20 and common 10-10 labels at their classic positions and densifies the
rest of the scalp with systematically named grid points.
"""
import math
import os

points = []  # (name, u, v), insertion order is file order
seen = set()


def put(name, u, v):
    if name in seen:
        raise ValueError(f"duplicate electrode name: {name}")
    seen.add(name)
    points.append((name, u, v))


def polar(r, az_deg):
    # azimuth measured from the front midline, positive toward the left ear
    a = math.radians(az_deg)
    return (-r * math.sin(a), r * math.cos(a))


# --- midline, nasion to inion ------------------------------------------------
midline = [
    ("Nz", 1.0), ("Fpz", 0.8), ("AFpz", 0.7), ("AFz", 0.6), ("AFFz", 0.5),
    ("Fz", 0.4), ("FFCz", 0.3), ("FCz", 0.2), ("FCCz", 0.1), ("Cz", 0.0),
    ("CCPz", -0.1), ("CPz", -0.2), ("CPPz", -0.3), ("Pz", -0.4),
    ("PPOz", -0.5), ("POz", -0.6), ("POOz", -0.7), ("Oz", -0.8),
    ("OIz", -0.9), ("Iz", -1.0),
]
for name, v in midline:
    put(name, 0.0, v)

# --- lateral rows ------------------------------------------------------------
# (row label, front-to-back midline fraction)
rows = [
    ("AFp", 0.15), ("AF", 0.20), ("AFF", 0.25), ("F", 0.30), ("FFC", 0.35),
    ("FC", 0.40), ("FCC", 0.45), ("C", 0.50), ("CCP", 0.55), ("CP", 0.60),
    ("CPP", 0.65), ("P", 0.70), ("PPO", 0.75), ("PO", 0.80), ("POO", 0.85),
]
# legacy names for the ring (column 7/8) and outer (column 9/10) positions
legacy7 = {"F": ("F7", "F8"), "FC": ("FT7", "FT8"), "C": ("T7", "T8"),
           "CP": ("TP7", "TP8"), "P": ("P7", "P8"), "PO": ("PO7", "PO8"),
           "AF": ("AF7", "AF8"), "AFF": ("AFF7", "AFF8"), "FFC": ("FFT7", "FFT8"),
           "FCC": ("FTT7", "FTT8"), "CCP": ("TTP7", "TTP8"), "CPP": ("TPP7", "TPP8"),
           "PPO": ("PPO7", "PPO8"), "POO": ("POO7", "POO8"), "AFp": ("AFp7", "AFp8")}
legacy9 = {"F": ("F9", "F10"), "FC": ("FT9", "FT10"), "C": ("T9", "T10"),
           "CP": ("TP9", "TP10"), "P": ("P9", "P10"), "PO": ("PO9", "PO10")}


def arc_points(anchor_left, mid_v, n_per_side):
    """Points along the circle arc through (xa,ya), (0,mid_v), (-xa,ya),
    at equal angular steps; returns 2*n_per_side+1 points left to right."""
    xa, ya = anchor_left
    denom = 2.0 * (ya - mid_v)
    total = 2 * n_per_side
    if abs(denom) < 1e-12:  # collinear: straight segment
        return [(xa * (1.0 - 2.0 * i / total), ya) for i in range(total + 1)]
    c = (xa * xa + ya * ya - mid_v * mid_v) / denom
    rho = abs(mid_v - c)
    ang_l = math.atan2(ya - c, xa)
    ang_m = math.atan2(mid_v - c, 0.0)
    ang_r = math.pi - ang_l if ang_l >= 0 else -math.pi - ang_l
    out = []
    for i in range(total + 1):
        t = i / total
        if t <= 0.5:
            a = ang_l + (ang_m - ang_l) * (t / 0.5)
        else:
            a = ang_m + (ang_r - ang_m) * ((t - 0.5) / 0.5)
        out.append((rho * math.cos(a), rho * math.sin(a) + c))
    return out


cols_left = ["7", "7h", "5", "5h", "3", "3h", "1", "1h"]
cols_right = ["8", "8h", "6", "6h", "4", "4h", "2", "2h"]
for label, f in rows:
    anchor = polar(0.8, f * 180.0)
    pts = arc_points(anchor, (0.5 - f) * 2.0, 8)
    for i, cn in enumerate(cols_left):
        name = legacy7[label][0] if cn == "7" else f"{label}{cn}"
        put(name, *pts[i])
    for i, cn in enumerate(cols_right):
        name = legacy7[label][1] if cn == "8" else f"{label}{cn}"
        put(name, *pts[16 - i])

# --- ring positions of the degenerate front/back rows ------------------------
for name, az in [("Fp1h", 9.0), ("Fp1", 18.0), ("O1", 162.0), ("O1h", 171.0)]:
    put(name, *polar(0.8, az))
for name, az in [("Fp2h", 9.0), ("Fp2", 18.0), ("O2", 162.0), ("O2h", 171.0)]:
    u, v = polar(0.8, az)
    put(name, -u, v)

# --- outer belts: 0.9 ring ("9h"/"10h") and head-circle ring ("9"/"10") ------
belt_rows = [("NFp", 0.05), ("Fp", 0.10)] + rows + [("O", 0.90), ("OI", 0.95)]
for label, f in belt_rows:
    az = f * 180.0
    n9l, n9r = legacy9.get(label, (f"{label}9", f"{label}10"))
    u, v = polar(1.0, az)
    put(n9l, u, v)
    put(n9r, -u, v)
    u, v = polar(0.9, az)
    put(f"{label}9h", u, v)
    put(f"{label}10h", -u, v)

# --- earlobes and mastoids ----------------------------------------------------
u, v = polar(1.05, 95.0)
put("A1", u, v)
put("A2", -u, v)
u, v = polar(1.08, 117.0)
put("M1", u, v)
put("M2", -u, v)

# --- normalize into the unit disk and write ----------------------------------
max_r = max(math.hypot(u, v) for _, u, v in points)
out_path = os.path.join(os.path.dirname(__file__), "..", "data", "scalp_mesh.csv")
os.makedirs(os.path.dirname(out_path), exist_ok=True)
with open(out_path, "w", newline="\n") as fh:
    fh.write("name,u,v\n")
    for name, u, v in points:
        fh.write(f"{name},{u / max_r:.9f},{v / max_r:.9f}\n")
print(f"wrote {len(points)} positions to {os.path.normpath(out_path)}")
