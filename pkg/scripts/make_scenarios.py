"""Author the scenario fixtures with library-computed geometry.

Positions, the follower's pin location, and the line-of-sight expectations
are all computed here rather than typed by hand, and each scenario is run
once before being written so a broken fixture can never land.
"""

import json
import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from covista.geom import Pivot, Vec3, alignment_target, azimuth, canonical_to_world
from covista.harness import run_scenario
from covista.scene import load_scene, occluded, pivot_of

ROOT = Path(__file__).resolve().parents[1]
SCENES = ROOT / "fixtures" / "scenes"
OUT = ROOT / "fixtures" / "scenarios"

DEG = math.pi / 180.0

scene = load_scene((SCENES / "terrain_demo.json").read_text())
pivot = pivot_of(scene)


def ring(azimuth_deg: float, radius: float = 1.5, height: float = 1.6) -> list[float]:
    a = azimuth_deg * DEG
    return [radius * math.sin(a), height, radius * math.cos(a)]


ada_start = ring(0.0)
grace_start = ring(100.0)
alpha_ada = azimuth(Vec3.from_seq(ada_start), pivot)
alpha_grace = azimuth(Vec3.from_seq(grace_start), pivot)
# grace's replica rotation once she aligns with ada (ada never aligns)
rho_grace = alignment_target(alpha_grace, alpha_ada, 0.0)


# -- dyad_100deg: the latency/jitter/loss timing fixture ---------------------

dyad = {
    "scene": "../scenes/terrain_demo.json",
    "net": {"one_way_latency": 0.1, "jitter": 0.02, "drop_prob": 0.05, "seed": 7},
    "duration_s": 4.0,
    "bots": [
        {"name": "ada", "start": ada_start, "script": []},
        {
            "name": "grace",
            "start": grace_start,
            "script": [
                {"cmd": "wait", "s": 0.5},
                {"cmd": "align_with", "user": "ada"},
            ],
        },
    ],
    "los_checks": [],
}

result = run_scenario({**dyad, "scene": str(SCENES / "terrain_demo.json")}, seed=7)
completed = [e for e in result.events if e["kind"] == "align_completed"]
requested = [e for e in result.events if e["kind"] == "align_requested"]
assert len(completed) == 1, completed
assert abs((completed[0]["t"] - requested[0]["t"]) - 100.0 / 90.0) < 1e-9
rerun = run_scenario({**dyad, "scene": str(SCENES / "terrain_demo.json")}, seed=7)
assert rerun.log_text == result.log_text


# -- dyad_pin_los: pointing, pinning, and a sightline contrast ---------------

q = Vec3(0.3, 1.2, 0.2)  # the spot ada points at, canonical frame
pin_world = canonical_to_world(q, rho_grace, pivot)

# grace's final vantage: canonical eye chosen so tower_b blocks house_3
eye_canonical = Vec3(-0.4647, 1.6, 0.647)
grace_final = canonical_to_world(eye_canonical, rho_grace, pivot)

blocked = occluded(eye_canonical, scene.object_by_id("house_3").position, scene, ("house_3",))
assert blocked.occluded and blocked.blocker_id == "tower_b", blocked
clear = occluded(
    Vec3.from_seq(ada_start), scene.object_by_id("house_3").position, scene, ("house_3",)
)
assert not clear.occluded, clear

pin_los = {
    "scene": "../scenes/terrain_demo.json",
    "net": {"one_way_latency": 0.05, "jitter": 0.01, "drop_prob": 0.0, "seed": 3},
    "duration_s": 4.0,
    "bots": [
        {
            "name": "ada",
            "start": ada_start,
            "script": [
                {"cmd": "wait", "s": 0.5},
                {"cmd": "point_at", "canonical": q.as_list(), "hand": "rh"},
            ],
        },
        {
            "name": "grace",
            "start": grace_start,
            "script": [
                {"cmd": "wait", "s": 0.2},
                {"cmd": "align_with", "user": "ada"},
                {"cmd": "wait", "s": 1.8},
                {"cmd": "place_pin", "world": pin_world.as_list()},
                {"cmd": "move_to", "p": grace_final.as_list(), "duration": 0.5},
            ],
        },
    ],
    "los_checks": [
        {"eye_user": "grace", "target_object": "house_3", "expect_occluded": True},
        {"eye_user": "ada", "target_object": "house_3", "expect_occluded": False},
    ],
}

result = run_scenario({**pin_los, "scene": str(SCENES / "terrain_demo.json")}, seed=3)
pins = [e for e in result.events if e["kind"] == "pin_placed"]
assert len(pins) == 1
assert Vec3.from_seq(pins[0]["canonical"]).distance_to(q) <= 1e-9, pins
samples = [e for e in result.events if e["kind"] == "reference_sample"]
assert samples and all(e["error"] <= 1e-9 for e in samples)
los = [e for e in result.events if e["kind"] == "los_check"]
assert len(los) == 2 and all(e["occluded"] == e["expect_occluded"] for e in los), los


# -- metrics_demo: alignment counts and exact gaze episode lengths -----------

away = [0.0, 1.0, 0.0]  # looking here breaks gaze with anyone on the ring
ada_moved = ring(40.0)

metrics = {
    "scene": "../scenes/terrain_demo.json",
    "duration_s": 12.0,
    "bots": [
        {
            "name": "ada",
            "start": ada_start,
            "script": [
                {"cmd": "wait", "s": 2.0},
                {"cmd": "move_to", "p": ada_moved, "duration": 1.0},
                {"cmd": "wait", "s": 1.5},
                {"cmd": "point_at", "canonical": q.as_list(), "hand": "rh"},
                {"cmd": "wait", "s": 0.5},
                {"cmd": "align_with", "user": "grace"},
                {"cmd": "wait", "s": 1.0},
                {"cmd": "look_at", "user": "grace"},
                {"cmd": "wait", "s": 1.5},
                {"cmd": "look_at", "p": away},
                {"cmd": "wait", "s": 0.5},
                {"cmd": "look_at", "user": "grace"},
                {"cmd": "wait", "s": 0.5},
                {"cmd": "place_pin", "world": [0.2, 1.0, 0.3]},
            ],
        },
        {
            "name": "grace",
            "start": grace_start,
            "script": [
                {"cmd": "wait", "s": 0.25},
                {"cmd": "align_with", "user": "ada"},
                {"cmd": "wait", "s": 3.25},
                {"cmd": "align_with", "user": "ada"},
                {"cmd": "wait", "s": 0.5},
                {"cmd": "place_pin", "world": [0.1, 1.0, -0.2]},
                {"cmd": "place_pin", "world": [-0.3, 1.0, 0.1]},
                {"cmd": "wait", "s": 2.0},
                {"cmd": "look_at", "user": "ada"},
                {"cmd": "wait", "s": 3.0},
                {"cmd": "point_at", "world": [0.2, 1.3, 0.1], "hand": "lh"},
                {"cmd": "wait", "s": 1.5},
                {"cmd": "look_at", "p": away},
                {"cmd": "wait", "s": 0.5},
                {"cmd": "look_at", "user": "ada"},
                {"cmd": "wait", "s": 0.25},
                {"cmd": "look_at", "p": away},
            ],
        },
    ],
    "los_checks": [
        {"eye_user": "ada", "target_object": "house_3", "expect_occluded": False},
    ],
}

result = run_scenario({**metrics, "scene": str(SCENES / "terrain_demo.json")}, seed=0)
completed = [e for e in result.events if e["kind"] == "align_completed"]
assert len(completed) == 3, completed
ons = [e for e in result.events if e["kind"] == "gaze_on"]
offs = [e for e in result.events if e["kind"] == "gaze_off"]
assert len(ons) == 2 and len(offs) == 2, (ons, offs)
total = sum(off["t"] - on["t"] for on, off in zip(ons, offs))
assert total == 4.0, total


OUT.mkdir(parents=True, exist_ok=True)
for name, doc in (
    ("dyad_100deg", dyad),
    ("dyad_pin_los", pin_los),
    ("metrics_demo", metrics),
):
    path = OUT / f"{name}.json"
    path.write_text(json.dumps(doc, indent=2) + "\n")
    print(f"wrote {path}")
