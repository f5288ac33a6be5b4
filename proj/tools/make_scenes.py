#!/usr/bin/env python3
"""Regenerate scenes/*.scene.json. Lengths are in scene units (1 unit = 5 cm)."""

import json
import math
import pathlib

OUT = pathlib.Path(__file__).resolve().parent.parent / "scenes"
H = math.pi / 2

# 7-DOF arm, zero configuration pointing straight up.
# Stage-2 settings for the 7-DOF scenes: fine steps, long inner loops and
# a stiff grasp-alignment weight.
ARM7_TRAJOPT = {"interp": 12, "max_step": 0.01, "inner_steps": 100, "outer_iters": 40,
                "w_start": 1000.0, "particles": 8, "clearance": 1.5,
                "contact_tolerance": 0.02, "ik": {"prefer_top_down": True}}

ARM7 = {
    "name": "arm7",
    "joints": [
        {"name": "j1", "axis": [0, 0, 1], "offset": [0, 0, 3.3], "limits": [-2.9, 2.9]},
        {"name": "j2", "axis": [0, 1, 0], "offset": [0, 0, 3.3], "limits": [-1.8, 1.8]},
        {"name": "j3", "axis": [0, 0, 1], "offset": [0, 0, 3.2], "limits": [-2.9, 2.9]},
        {"name": "j4", "axis": [0, 1, 0], "offset": [0, 0, 3.2], "limits": [-3.0, 3.0]},
        {"name": "j5", "axis": [0, 0, 1], "offset": [0, 0, 3.0], "limits": [-2.9, 2.9]},
        {"name": "j6", "axis": [0, 1, 0], "offset": [0, 0, 3.0], "limits": [-3.0, 3.0]},
        {"name": "j7", "axis": [0, 0, 1], "offset": [0, 0, 1.0], "limits": [-2.9, 2.9]},
    ],
    "link_spheres": [
        {"centers": [[0, 0, 1.5]], "radii": [0.7]},
        {"centers": [[0, 0, 0.8], [0, 0, 2.4]], "radii": [0.7, 0.7]},
        {"centers": [[0, 0, 1.6]], "radii": [0.65]},
        {"centers": [[0, 0, 0.8], [0, 0, 2.2]], "radii": [0.6, 0.6]},
        {"centers": [[0, 0, 1.5]], "radii": [0.55]},
        {"centers": [[0, 0, 0.5]], "radii": [0.5]},
        {"centers": [[0, 0, 0.3]], "radii": [0.55]},
    ],
    "tool_offset": {"translation": [0, 0, 1.6]},
    "home": [0.0, 0.4, 0.0, 1.9, 0.0, 0.85, 0.0],
}

PIECES = {
    "L": [[0, 0], [1, 0], [2, 0], [2, 1]],
    "J": [[0, 0], [1, 0], [2, 0], [0, 1]],
    "S": [[0, 0], [1, 0], [1, 1], [2, 1]],
    "Z": [[1, 0], [2, 0], [0, 1], [1, 1]],
    "O": [[0, 0], [1, 0], [0, 1], [1, 1]],
    "I": [[0, 0], [1, 0], [2, 0], [3, 0]],
    "T": [[0, 0], [1, 0], [2, 0], [1, 1]],
    "P": [[0, 0], [1, 0], [0, 1], [1, 1], [0, 2]],
}


def arm_at(x, y):
    arm = json.loads(json.dumps(ARM7))
    arm["base"] = {"translation": [x, y, 0]}
    return arm


def tetris(name, description, box_max, pieces, yaws, initial, base, optimizer=None):
    blocks = []
    for i, (p, yaw) in enumerate(zip(pieces, yaws)):
        blocks.append({
            "name": p if pieces.count(p) == 1 else f"{p}{pieces[:i].count(p) + 1}",
            "cells": PIECES[p],
            "cell_size": 1.0,
            "yaw": yaw,
            "initial_pose": initial[i],
        })
    scene = {
        "name": name,
        "description": description,
        "problem_type": "tetris",
        "box": {"min": [0, 0, 0], "max": [box_max[0], box_max[1], 1]},
        "z_star": 0.0,
        "yaw_mode": "fixed",
        "blocks": blocks,
        "robot": arm_at(*base),
        "grasp": {"approach": [0, 0, 1.5]},
        "optimizer": {"eta_init": 0.2, "alpha": 0.01},
        "trajopt": dict(ARM7_TRAJOPT),
    }
    if optimizer:
        scene["optimizer"].update(optimizer)
    return scene


def planar(obstacles, name, description):
    scene = {
        "name": name,
        "description": description,
        "problem_type": "motion",
        "robot": {"name": "planar3", "planar": {"lengths": [1.0, 1.0, 1.0], "sphere_radius": 0.1}},
        "start": [-1.2, 0.3, 0.3],
        "goal": [1.2, -0.3, -0.3],
        "trajopt": {"waypoints": 3, "interp": 6, "particles": 8},
    }
    if obstacles:
        scene["obstacles"] = obstacles
    return scene


def write(name, scene):
    path = OUT / f"{name}.scene.json"
    path.write_text(json.dumps(scene, indent=2) + "\n")
    print(path)


def main():
    OUT.mkdir(exist_ok=True)

    write("tetris5", tetris(
        "tetris5",
        "L, J, S, T and P blocks packed into a 7 x 3 box",
        (7, 3), ["L", "J", "S", "T", "P"], [3 * H, 2 * H, 0, 0, 3 * H],
        [[-2.0, -8.0, 0, 0], [1.5, -8.5, 0, 0], [5.5, -8.5, 0, 0], [9.0, -8.0, 0, 0],
         [3.5, -11.0, 0, 0]],
        base=(3.5, -4.5),
    ))

    write("tetris8", tetris(
        "tetris8",
        "eight tetrominoes packed into an 8 x 4 box",
        (8, 4), ["L", "L", "J", "J", "S", "Z", "O", "I"],
        [0, 3 * H, 0, 2 * H, H, 0, 0, 0],
        [[-3.0, -8.0, 0, 0], [0.5, -8.5, 0, 0], [4.0, -9.0, 0, 0], [7.5, -8.5, 0, 0],
         [11.0, -8.0, 0, 0], [-1.0, -11.5, 0, 0], [4.0, -12.0, 0, 0], [9.0, -11.5, 0, 0]],
        base=(4.0, -4.5), optimizer={"alpha": 0.03},
    ))

    domino = {
        "name": "domino2",
        "description": "two 1 x 2 dominoes filling a 2 x 2 box",
        "problem_type": "tetris",
        "box": {"min": [0, 0, 0], "max": [2, 2, 1]},
        "z_star": 0.0,
        "yaw_mode": "fixed",
        "blocks": [
            {"name": "a", "cells": [[0, 0], [1, 0]], "cell_size": 1.0, "yaw": 0},
            {"name": "b", "cells": [[0, 0], [1, 0]], "cell_size": 1.0, "yaw": 0},
        ],
        "optimizer": {"sample_batch": 1024, "optimize_batch": 128, "eta_init": 0.2,
                      "alpha": 0.01},
    }
    write("domino2", domino)

    trivial = {
        "name": "trivial",
        "description": "one block in a box of its own size; every sample is already valid",
        "problem_type": "tetris",
        "box": {"min": [0, 0, 0], "max": [1, 1, 1]},
        "z_star": 0.0,
        "yaw_mode": "fixed",
        "blocks": [{"name": "unit", "cells": [[0, 0]], "cell_size": 1.0, "yaw": 0}],
        "weights": {"block_block": 0, "block_wall": 0, "height": 0},
        "optimizer": {"sample_batch": 512, "optimize_batch": 256},
    }
    write("trivial", trivial)

    # Blocks wait at +60 degrees, the tower goes up at -60 degrees, and a
    # column stands between them at 0 degrees.
    radius = 8.0
    initial = []
    for k, deg in enumerate([42, 54, 66, 78]):
        a = math.radians(deg)
        initial.append([round(radius * math.cos(a), 4), round(radius * math.sin(a), 4), 0.5, 0])
    tower_at = (radius * math.cos(math.radians(-60)), radius * math.sin(math.radians(-60)))
    column = [[0, 0, 0.75 * k] for k in range(1, 11)]
    tower = {
        "name": "tower4_obstacle",
        "description": "stack four cubes while reaching around a column",
        "problem_type": "tower",
        "tower": {
            "num_blocks": 4,
            "block_size": 1.0,
            "table_height": 0.0,
            "region": {"min": [round(tower_at[0] - 0.5, 4), round(tower_at[1] - 0.5, 4), 0],
                       "max": [round(tower_at[0] + 0.5, 4), round(tower_at[1] + 0.5, 4), 4]},
        },
        "obstacles": [{
            "name": "column",
            "centers": column,
            "radii": [1.0] * len(column),
            "pose": [radius, 0.0, 0.0, 0.0],
        }],
        "initial_poses": initial,
        "robot": arm_at(0, 0),
        "grasp": {"approach": [0, 0, 1.0]},
        "optimizer": {"sample_batch": 1024, "optimize_batch": 128, "eta_init": 0.2,
                      "alpha": 0.01},
        "trajopt": dict(ARM7_TRAJOPT),
    }
    write("tower4_obstacle", tower)

    write("motion_corridor", planar(
        [{"name": "post", "centers": [[0, 0, 0]], "radii": [0.3], "pose": [2.4, 0, 0, 0]}],
        "motion_corridor", "planar arm sweeping past a single post"))
    write("motion_empty", planar(None, "motion_empty", "planar arm in free space"))


if __name__ == "__main__":
    main()
