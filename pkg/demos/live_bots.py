"""
A live server with two scripted clients
=======================================

Everything over real websockets on loopback: the authoritative service
from `covista server`, and two bots like the ones `covista bot` runs.
One sits still; the other walks through a short script, aligns to the
first, and drops a pin. The server prints one JSON line per reliable
event to stdout as it happens.
"""

import asyncio
import math
import sys
from pathlib import Path

from covista.botscript import parse_script
from covista.cli import bot_session
from covista.geom import Vec3
from covista.server import ServerConfig, SessionServer

SCENE = Path(__file__).resolve().parents[1] / "fixtures" / "scenes" / "terrain_demo.json"
DEG = math.pi / 180.0


def ring(az_deg, r=1.5):
    a = az_deg * DEG
    return Vec3(r * math.sin(a), 1.6, r * math.cos(a))


async def main():
    # port 0 lets the OS pick; a fast sweep keeps the demo short
    config = ServerConfig(scene_path=SCENE, port=0, angular_speed=math.radians(360.0))
    server = SessionServer(config, log_stream=sys.stdout)
    serving = asyncio.ensure_future(server.serve())
    await server.started.wait()
    uri = f"ws://127.0.0.1:{server.port}"
    print(f"serving on {uri}", file=sys.stderr)

    anchor = parse_script([{"cmd": "wait", "s": 3.0}], "anchor")
    mover = parse_script(
        [
            {"cmd": "wait", "s": 0.5},
            {"cmd": "align_with", "user": "ada"},
            {"cmd": "wait", "s": 1.0},
            {"cmd": "place_pin", "world": [0.25, 1.05, 0.1]},
            {"cmd": "wait", "s": 0.5},
        ],
        "mover",
    )

    # both clients run concurrently against the same server
    await asyncio.gather(
        bot_session(uri, "ada", ring(0.0), anchor),
        bot_session(uri, "grace", ring(100.0), mover),
    )

    server.shutdown()
    snapshot = await serving
    print(f"final snapshot: {len(snapshot['pins'])} pin(s), "
          f"{len(snapshot['users'])} user(s) still in", file=sys.stderr)


asyncio.run(main())
