#!/usr/bin/env python3
"""Emit a synthetic patent-record corpus plus a matching mock playbook, so the
dataset builder can be exercised end to end without any real patent data:

    python scripts/make_synthetic_records.py --out tmp_corpus --n 10
    patentgen build-dataset tmp_corpus/records --mock-playbook tmp_corpus/playbook.json \
        --out tmp_corpus/build --sizes 6,2,2
"""

from __future__ import annotations

import argparse
import json
import random
from pathlib import Path

from patentgen.gateway import MockPlaybook, PlaybookRule

DEVICES = ["valve", "conveyor", "antenna", "gearbox", "sensor array", "battery pack",
           "pump", "router", "gripper", "turbine"]
TRICKS = ["load-aware retuning", "phase-locked sampling", "thermal derating",
          "redundant switching", "adaptive filtering"]


def record_for(i: int, rng: random.Random) -> dict:
    device = rng.choice(DEVICES)
    trick = rng.choice(TRICKS)
    return {
        "record_id": f"syn{i:04d}",
        "title": f"{device.title()} With {trick.title()}",
        "abstract": f"A {device} that applies {trick} to improve reliability.",
        "background": f"Conventional {device}s do not use {trick}, which limits their service life.",
        "summary": f"The invention adds {trick} to a {device}, monitored by an embedded controller.",
        "claims": f"1. A {device} comprising a controller configured for {trick}.\n"
                  f"2. The {device} of claim 1, further comprising a diagnostic log.",
        "description": f"The {device} integrates {trick}. The controller samples its inputs, "
                       f"adjusts its outputs, and records diagnostics for later review.",
        "decision_label": "ACCEPTED",
    }


def playbook() -> MockPlaybook:
    return MockPlaybook(
        rules=[
            PlaybookRule(
                match="You are the inventor",
                responses=["A thorough synthetic answer covering the invention in detail."],
            ),
            PlaybookRule(
                match="meets the quality standards",
                responses=["<Result> Pass </Result>"],
            ),
            PlaybookRule(
                match="summarize the key parts",
                responses=[
                    "<Section-1> Hardware overview and components. </Section-1>\n"
                    "<Section-2> Control method and diagnostics. </Section-2>"
                ],
            ),
        ]
    )


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="tmp_corpus")
    parser.add_argument("--n", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = random.Random(args.seed)
    out = Path(args.out)
    records_dir = out / "records"
    records_dir.mkdir(parents=True, exist_ok=True)
    for i in range(1, args.n + 1):
        record = record_for(i, rng)
        (records_dir / f"{record['record_id']}.json").write_text(
            json.dumps(record, indent=2) + "\n", "utf-8"
        )
    playbook().save(out / "playbook.json")
    print(f"wrote {args.n} records to {records_dir}/ and a playbook to {out}/playbook.json")


if __name__ == "__main__":
    main()
