#!/usr/bin/env python3
"""Writes the binary/text fixture twins used by the integration tests.

Independent of the Rust code: everything is packed with `struct` following
the published COLMAP and PLY layouts. Run from this directory.
"""

import json
import math
import os
import struct

HERE = os.path.dirname(os.path.abspath(__file__))

# id, model name, model id, width, height, params
CAMERAS = [
    (1, "PINHOLE", 1, 640, 480, [500.0, 502.5, 320.0, 240.0]),
    (2, "SIMPLE_RADIAL", 2, 800, 600, [610.25, 401.5, 298.75, -0.0123]),
    (3, "OPENCV", 4, 1024, 768, [700.0, 701.0, 515.0, 380.0, 0.01, -0.002, 0.0003, -0.0004]),
]


def quat(axis, angle):
    n = math.sqrt(sum(a * a for a in axis))
    s = math.sin(angle / 2) / n
    return [math.cos(angle / 2), axis[0] * s, axis[1] * s, axis[2] * s]


# id, qvec (w, x, y, z), tvec, camera id, name, points2D
IMAGES = [
    (1, quat((0, 1, 0), 0.3), [0.1, -0.2, 4.0], 1, "frame_0001.png", [(10.5, 20.25, 7), (100.0, 4.5, 2**64 - 1)]),
    (2, quat((1, 1, 0), -0.7), [1.5, 0.25, 3.5], 2, "frame 0002.png", []),
    (3, [1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0], 3, "sub/frame_0003.png", [(1.0, 2.0, 3)]),
]


def colmap():
    txt = os.path.join(HERE, "colmap_twin", "text")
    binary = os.path.join(HERE, "colmap_twin", "binary")
    os.makedirs(txt, exist_ok=True)
    os.makedirs(binary, exist_ok=True)

    with open(os.path.join(txt, "cameras.txt"), "w") as f:
        f.write("# Camera list with one line of data per camera:\n")
        f.write("#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n")
        f.write(f"# Number of cameras: {len(CAMERAS)}\n")
        for cid, name, _, w, h, params in CAMERAS:
            f.write(" ".join([str(cid), name, str(w), str(h)] + [repr(p) for p in params]) + "\n")
    with open(os.path.join(binary, "cameras.bin"), "wb") as f:
        f.write(struct.pack("<Q", len(CAMERAS)))
        for cid, _, mid, w, h, params in CAMERAS:
            f.write(struct.pack("<IiQQ", cid, mid, w, h))
            f.write(struct.pack("<%dd" % len(params), *params))

    with open(os.path.join(txt, "images.txt"), "w") as f:
        f.write("# Image list with two lines of data per image:\n")
        f.write("#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n")
        f.write("#   POINTS2D[] as (X, Y, POINT3D_ID)\n")
        for iid, q, t, cid, name, pts in IMAGES:
            f.write(" ".join([str(iid)] + [repr(v) for v in q + t] + [str(cid), name]) + "\n")
            f.write(" ".join(f"{x!r} {y!r} {-1 if pid == 2**64 - 1 else pid}" for x, y, pid in pts) + "\n")
    with open(os.path.join(binary, "images.bin"), "wb") as f:
        f.write(struct.pack("<Q", len(IMAGES)))
        for iid, q, t, cid, name, pts in IMAGES:
            f.write(struct.pack("<I4d3dI", iid, *q, *t, cid))
            f.write(name.encode() + b"\0")
            f.write(struct.pack("<Q", len(pts)))
            for x, y, pid in pts:
                f.write(struct.pack("<ddQ", x, y, pid))


# Octahedron with a per-vertex "quality" property; float32-exact values.
OCTA_V = [
    (1.0, 0.0, 0.0, 0.5),
    (-1.0, 0.0, 0.0, 1.25),
    (0.0, 1.0, 0.0, 2.0),
    (0.0, -1.0, 0.0, 3.5),
    (0.0, 0.0, 1.0, -4.0),
    (0.0, 0.0, -1.0, 0.125),
]
OCTA_F = [(0, 2, 4), (2, 1, 4), (1, 3, 4), (3, 0, 4), (2, 0, 5), (1, 2, 5), (3, 1, 5), (0, 3, 5)]


def ply_header(fmt, extra=""):
    return (
        f"ply\nformat {fmt} 1.0\ncomment fixture\n"
        f"element vertex {len(OCTA_V)}\nproperty float x\nproperty float y\nproperty float z\n"
        f"property float quality\n{extra}"
        f"element face {len(OCTA_F)}\nproperty list uchar int vertex_indices\nend_header\n"
    )


def meshes():
    with open(os.path.join(HERE, "octa_ascii.ply"), "w") as f:
        f.write(ply_header("ascii"))
        for v in OCTA_V:
            f.write(" ".join(repr(c) for c in v) + "\n")
        for face in OCTA_F:
            f.write("3 " + " ".join(str(i) for i in face) + "\n")
    with open(os.path.join(HERE, "octa_binary.ply"), "wb") as f:
        f.write(ply_header("binary_little_endian").encode())
        for v in OCTA_V:
            f.write(struct.pack("<4f", *v))
        for face in OCTA_F:
            f.write(struct.pack("<B3i", 3, *face))
    with open(os.path.join(HERE, "octa_big_endian.ply"), "wb") as f:
        f.write(ply_header("binary_big_endian").encode())
        for v in OCTA_V:
            f.write(struct.pack(">4f", *v))
        for face in OCTA_F:
            f.write(struct.pack(">B3i", 3, *face))
    with open(os.path.join(HERE, "octa.obj"), "w") as f:
        f.write("# octahedron\n")
        for v in OCTA_V:
            f.write("v %r %r %r\n" % v[:3])
        for face in OCTA_F:
            f.write("f %d %d %d\n" % tuple(i + 1 for i in face))


SH_C0 = 0.28209479177
SPLAT_PROPS = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2", "f_rest_0", "opacity",
               "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"]


def f32(v):
    return struct.unpack("<f", struct.pack("<f", v))[0]


def splats():
    rows = []
    for i in range(10):
        raw = {
            "x": 0.1 * i, "y": -0.05 * i, "z": 2.0 + 0.3 * i,
            "nx": 0.0, "ny": 0.0, "nz": 0.0,
            "f_dc_0": -2.0 + 0.45 * i, "f_dc_1": 0.1 * i - 0.3, "f_dc_2": 1.5 - 0.2 * i,
            "f_rest_0": 9.0,
            "opacity": -3.0 + 0.7 * i,
            "scale_0": -4.0 + 0.3 * i, "scale_1": -2.0, "scale_2": 0.25 * i - 1.0,
            "rot_0": 1.0 + 0.1 * i, "rot_1": 0.2 * i, "rot_2": -0.1, "rot_3": 0.05 * i,
        }
        rows.append({k: f32(v) for k, v in raw.items()})
    with open(os.path.join(HERE, "splats10.ply"), "wb") as f:
        header = "ply\nformat binary_little_endian 1.0\nelement vertex %d\n" % len(rows)
        header += "".join(f"property float {p}\n" for p in SPLAT_PROPS) + "end_header\n"
        f.write(header.encode())
        for r in rows:
            f.write(struct.pack("<%df" % len(SPLAT_PROPS), *[r[p] for p in SPLAT_PROPS]))
    expected = []
    for r in rows:
        q = [r["rot_0"], r["rot_1"], r["rot_2"], r["rot_3"]]
        n = math.sqrt(sum(c * c for c in q))
        expected.append({
            "mean": [r["x"], r["y"], r["z"]],
            "opacity": 1.0 / (1.0 + math.exp(-r["opacity"])),
            "scale": [math.exp(r["scale_0"]), math.exp(r["scale_1"]), math.exp(r["scale_2"])],
            "rotation_wxyz": [c / n for c in q],
            "color": [min(1.0, max(0.0, 0.5 + SH_C0 * r[k])) for k in ("f_dc_0", "f_dc_1", "f_dc_2")],
        })
    with open(os.path.join(HERE, "splats10_expected.json"), "w") as f:
        json.dump(expected, f, indent=1)


if __name__ == "__main__":
    colmap()
    meshes()
    splats()
