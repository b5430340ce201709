#!/usr/bin/env python3
"""End-to-end demo against the scripted mock backend.

Builds a small playbook covering every agent role, runs the full pipeline on
a sample inventor draft, runs the one-call zero-shot baseline on the same
draft, and prints both call logs side by side. No network, fully
deterministic; artifacts land in --out.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from patentgen.core import make_draft, patent_to_text
from patentgen.gateway import BackendConfig, LlmGateway, MockBackend, MockPlaybook, PlaybookRule
from patentgen.pipeline import PatentPipeline, PipelineConfig, run_zero_shot

DRAFT = make_draft(
    {
        1: "Conveyor motors overheat because speed control ignores belt load.",
        2: "Fixed-speed drives dominate; variable drives exist but need manual "
           "tuning. This invention self-tunes from load sensing.",
        3: "A torque sensor feeds a gain scheduler that retunes the speed loop "
           "every 50 ms, keeping motor current inside a thermal envelope.",
        4: "The self-tuning gain scheduler and its thermal envelope limiter are "
           "the protected core.",
        5: "Figure 1 shows the drive, sensor and scheduler; Figure 2 shows the "
           "retuning state machine.",
    },
    source_id="demo-conveyor",
)


def demo_playbook() -> MockPlaybook:
    def r(match, *responses):
        return PlaybookRule(match=match, responses=list(responses))

    return MockPlaybook(
        rules=[
            r("please generate a patent title",
              "<Title>Self-Tuning Conveyor Drive With Thermal Envelope Control</Title>"),
            r("please generate a patent abstract",
              "<Abstract>A conveyor drive retunes its speed loop from live torque "
              "measurements, holding motor current inside a thermal envelope.</Abstract>"),
            r("detailed background information",
              "<Background>Conveyor drives conventionally run at fixed speed "
              "regardless of belt load, wasting energy and overheating motors.</Background>"),
            r("generate the summary for the patent",
              "<Summary>The invention senses belt torque and reschedules control "
              "gains periodically, bounding thermal stress without manual tuning.</Summary>"),
            r("please generate patent claims",
              "<Claims>1. A conveyor drive comprising a torque sensor and a gain "
              "scheduler.\n2. The drive of claim 1, wherein gains are rescheduled "
              "every 50 ms.</Claims>"),
            r("detailed writing guide for the patent description",
              "<Section-1> Cover the hardware: motor, sensor, controller. </Section-1>\n"
              "<Section-2> Cover the retuning method and thermal limits. </Section-2>"),
            r("split this section of the description writing guide",
              "<Subsection-1> Describe the torque sensing chain. </Subsection-1>\n"
              "<Subsection-2> Describe the controller wiring. </Subsection-2>",
              "<Subsection-1> Describe the 50 ms retuning cycle. </Subsection-1>\n"
              "<Subsection-2> Describe the thermal envelope limiter. </Subsection-2>"),
            r("copy the all relevant content",
              "1. A conveyor drive comprising a torque sensor and a gain scheduler."),
            r("Just output this subsection of patent description",
              "The drive couples a shaft-mounted torque sensor to a digital "
              "controller that schedules speed-loop gains."),
            r("Only output the revised subsection",
              "The drive couples a shaft-mounted torque sensor to a digital "
              "controller that schedules speed-loop gains and logs each retune."),
            r("<Requirement>",
              "<Result>Fail</Result><Advice>State how often gains are rescheduled.</Advice>",
              "<Result>Pass</Result><Advice>Clear and consistent with the draft.</Advice>"),
            r("write a complete patent document",
              "<Patent><Title> Self-Tuning Conveyor Drive </Title>"
              "<Abstract> A load-aware drive. </Abstract>"
              "<Background> Fixed drives overheat. </Background>"
              "<Summary> Gains retune from torque. </Summary>"
              "<Claims> 1. A drive. </Claims></Patent>"),
        ]
    )


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="demo_run", help="run directory")
    args = parser.parse_args()

    config = BackendConfig(name="default", kind="mock", model_id="mock-model")
    gateway = LlmGateway(MockBackend(demo_playbook(), config), config=config)
    pipeline = PatentPipeline({"default": gateway}, run_dir=Path(args.out))
    doc = pipeline.run(DRAFT, PipelineConfig())

    print(patent_to_text(doc))
    print("pipeline call log:", doc.generation_meta.role_counts())

    baseline = run_zero_shot(gateway, DRAFT)
    print(f"zero-shot baseline: {len(baseline.sections)} sections parsed, "
          f"missing {list(baseline.missing) or 'none'}")
    print(f"artifacts in {args.out}/")


if __name__ == "__main__":
    main()
