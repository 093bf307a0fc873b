"""
Simulating a lossy session and reading the metrics
==================================================

The harness runs a whole two-user session in-process on a virtual clock:
real latency, jitter and droppable-frame loss, scripted bots, and a
metrics log at the end. Same scenario, same seed, same bytes out, every
time. Here we run the bundled dyad scenario and then feed its log to the
analyzer.
"""

import json
from pathlib import Path

from covista.harness import analyze, run_scenario

SCENARIO = Path(__file__).resolve().parents[1] / "fixtures" / "scenarios" / "dyad_100deg.json"

# 100 ms each way, 20 ms jitter, 5% of droppable pose frames lost
result = run_scenario(SCENARIO, seed=7)

print(f"simulated {json.loads(result.log_lines[0])['duration_s']} s of session time")
print(f"{len(result.events)} events logged:")
for event in result.events:
    line = f"  t={event['t']:7.3f}  {event['kind']}"
    if event["kind"] == "align_completed":
        line += f"  follower={event['follower']}"
    print(line)

# determinism is the harness's whole point: a rerun is byte-identical
again = run_scenario(SCENARIO, seed=7)
print(f"rerun byte-identical: {again.log_text == result.log_text}")

# the analyzer turns the event log into per-user behavioral counts
summary = analyze(result.log_lines)
for uid, row in summary["users"].items():
    print(f"{uid} ({row['name']}): {row['alignments']} alignment(s), "
          f"{row['pins']} pin(s), {row['gaze_seconds']:.1f} s of mutual gaze")
