#!/usr/bin/env python3
"""Regenerate the frozen fusion forward-pass trace shipped with the package.

The stored file pins the reference behavior; only regenerate it on purpose
(e.g. after an intentional change to the fusion math), never to make a
failing check pass.
"""

from pathlib import Path

from beamkws.fusion import write_golden_trace

OUT = Path(__file__).resolve().parent.parent / "src" / "beamkws" / "data" / "golden_fusion.bkt"

if __name__ == "__main__":
    write_golden_trace(OUT, seed=11, dim=8, hidden_dim=12, tokens=4, num_heads=1)
    print(f"wrote {OUT}")
