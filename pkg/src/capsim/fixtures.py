"""Demo asset generator: writes a self-contained scenario directory.

    python3 -m capsim.fixtures out/

produces a straight-tube lumen mesh, its centerline segments, an arm
table, a friction measurement CSV generated from the default curve, a
short teleoperation command log, and a scenario JSON tying them
together.  `capsim simulate --config out/scenario.json` runs as-is.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .arm import default_arm
from .friction import FrictionParams, total_friction_curve
from .geometry.meshio import save_ply
from .geometry.shapes import tube, tube_segments

TUBE_RADIUS = 0.01
TUBE_LENGTH = 0.5
N_RINGS = 125
N_SECTORS = 16


def write_mesh(path) -> dict:
    mesh = tube(radius=TUBE_RADIUS, length=TUBE_LENGTH,
                n_rings=N_RINGS, n_sectors=N_SECTORS)
    save_ply(path, mesh.vertices, mesh.triangles)
    return {"vertices": len(mesh.vertices), "triangles": len(mesh.triangles)}


def write_segments(path):
    segs = tube_segments(length=TUBE_LENGTH, n_rings=N_RINGS,
                         n_sectors=N_SECTORS, n_segments=4)
    data = {"segments": [{"start": list(s.start), "end": list(s.end),
                          "vertex_ids": [int(v) for v in s.vertex_ids]}
                         for s in segs]}
    with open(path, "w") as fh:
        json.dump(data, fh)
        fh.write("\n")


def write_friction_csv(path):
    params = FrictionParams()
    speeds = [0.2, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0]
    with open(path, "w") as fh:
        fh.write("speed_mm_s, force_mN\n")
        for x in speeds:
            fh.write(f"{x}, {total_friction_curve(x, params):.6f}\n")


def write_command_log(path):
    """Nudge the magnet along the tube axis every 25 steps."""
    with open(path, "w") as fh:
        for i in range(8):
            fh.write(json.dumps({"step": i * 25, "cmd": "magnet_delta",
                                 "magnet": 0, "dz": 0.004}) + "\n")


def write_scenario(path):
    scenario = {
        "mesh": "tube.ply",
        "segments": "segments.json",
        "command_log": "commands_in.jsonl",
        "capsule": {"position": [0.0, 0.0, 0.05]},
        "magnets": [
            {"moment": [0.0, 0.0, 8.0], "position": [0.0, 0.08, 0.05],
             "arm_mounted": False}
        ],
        "camera": {"kind": "surround",
                   "intrinsics": {"fx": 80.0, "fy": 80.0, "fov": 2.618}},
        "peristalsis": {},
        "mmc": "default",
        "dt": 0.001,
        "steps": 200,
        "outputs": {"dir": "run"},
    }
    with open(path, "w") as fh:
        json.dump(scenario, fh, indent=2)
        fh.write("\n")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="python3 -m capsim.fixtures",
        description="Write a runnable demo scenario directory")
    parser.add_argument("dir", help="output directory (created if missing)")
    args = parser.parse_args(argv)

    out = Path(args.dir)
    out.mkdir(parents=True, exist_ok=True)
    info = write_mesh(out / "tube.ply")
    write_segments(out / "segments.json")
    default_arm().save(out / "arm.json")
    write_friction_csv(out / "friction.csv")
    write_command_log(out / "commands_in.jsonl")
    write_scenario(out / "scenario.json")
    print(json.dumps({"dir": str(out), "mesh": info,
                      "files": sorted(p.name for p in out.iterdir())}, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
