"""Shared test plumbing: mock gateways, the standard pipeline playbook, and
independent metric oracles.

The oracles deliberately re-implement their metrics as straight-line code
(own tokenizer, own double loop) so production optimizations are checked
against a second route, not against themselves.
"""

from __future__ import annotations

import math
import re
from importlib import resources

from patentgen.agents import AgentRuntime
from patentgen.gateway import BackendConfig, LlmGateway, MockBackend, MockPlaybook, PlaybookRule


def mock_gateway(playbook: MockPlaybook, retry_max: int = 2, **config_kwargs):
    config = BackendConfig(
        name="default", kind="mock", model_id="mock-model",
        retry_max=retry_max, backoff_s=0.0, **config_kwargs,
    )
    backend = MockBackend(playbook, config)
    gateway = LlmGateway(backend, config=config, sleep_fn=lambda s: None)
    return gateway, backend


def mock_gateways(playbook: MockPlaybook, **kwargs) -> dict[str, LlmGateway]:
    gateway, _ = mock_gateway(playbook, **kwargs)
    return {"default": gateway}


def runtime_for(playbook: MockPlaybook, recorder=None, **kwargs) -> AgentRuntime:
    return AgentRuntime(gateways=mock_gateways(playbook, **kwargs), recorder=recorder)


def rule(match: str, *responses, regex: bool = False) -> PlaybookRule:
    return PlaybookRule(match=match, responses=list(responses), regex=regex)


COMPONENT_RESPONSES = {
    "title": "<Title>Adaptive Widget Control System</Title>",
    "abstract": "<Abstract>An apparatus for adaptive widget control.</Abstract>",
    "background": "<Background>Existing widgets lack adaptive gain control.</Background>",
    "summary": "<Summary>The invention provides online gain adaptation.</Summary>",
    "claims": "<Claims>1. A method for adaptive control.\n2. The method of claim 1, with sensors.</Claims>",
}

COMPONENT_MATCHERS = {
    "title": "please generate a patent title",
    "abstract": "please generate a patent abstract",
    "background": "detailed background information",
    "summary": "generate the summary for the patent",
    "claims": "please generate patent claims",
}

MATCH_PLANNER = "detailed writing guide for the patent description"
MATCH_EXPAND = "split this section of the description writing guide"
MATCH_RETRIEVE = "copy the all relevant content"
MATCH_WRITE = "Just output this subsection of patent description"
MATCH_REFINE = "Only output the revised subsection"
MATCH_REVIEW = "<Requirement>"

PASS_REVIEW = "<Result>Pass</Result><Advice>solid subsection</Advice>"
FAIL_REVIEW = "<Result>Fail</Result><Advice>add implementation detail</Advice>"


def planner_response(m: int) -> str:
    return "\n\n".join(f"<Section-{k}> Overview of part {k} </Section-{k}>" for k in range(1, m + 1))


def expansion_response(t: int, label: str = "") -> str:
    return "\n".join(
        f"<Subsection-{j}> Write about {label or 'aspect'} {j} </Subsection-{j}>"
        for j in range(1, t + 1)
    )


def pipeline_playbook(
    sections: int = 2,
    subsections: int | list[int] | None = 2,
    review_script: list[str] | None = None,
    extra_rules: list[PlaybookRule] | None = None,
) -> MockPlaybook:
    """Playbook covering every role of a full pipeline run.

    subsections None means no expansion rule (use with expansion off);
    an int scripts that many subsections per section; a list scripts each
    section's expansion separately.
    """
    rules = list(extra_rules or [])
    for role, matcher in COMPONENT_MATCHERS.items():
        rules.append(rule(matcher, COMPONENT_RESPONSES[role]))
    rules.append(rule(MATCH_PLANNER, planner_response(sections)))
    if subsections is not None:
        counts = [subsections] * sections if isinstance(subsections, int) else subsections
        rules.append(rule(MATCH_EXPAND, *[expansion_response(t, f"s{i+1}") for i, t in enumerate(counts)]))
    rules.append(rule(MATCH_RETRIEVE, "Relevant facts: adaptive gain control from claims."))
    rules.append(rule(MATCH_WRITE, "The system comprises an adaptive control unit."))
    rules.append(rule(MATCH_REFINE, "The system comprises an adaptive control unit with sensor feedback."))
    rules.append(rule(MATCH_REVIEW, *(review_script or [PASS_REVIEW])))
    return MockPlaybook(rules=rules)


# --- independent oracles -------------------------------------------------------


def _oracle_stopwords() -> set[str]:
    text = resources.files("patentgen").joinpath("assets/stopwords_en.txt").read_text("utf-8")
    return set(text.split())


def oracle_irr(sentences: list[str], t: float, epsilon: float) -> float:
    """Naive double-loop repetition metric over pre-split sentences."""
    stop = _oracle_stopwords()
    sets = []
    for sentence in sentences:
        tokens = [w for w in re.split(r"[^a-z0-9]+", sentence.lower()) if w and w not in stop]
        sets.append(set(tokens))
    n = len(sets)
    count = 0
    for i in range(n):
        for j in range(i + 1, n):
            a, b = sets[i], sets[j]
            if not a and not b:
                similarity = 1.0
            else:
                union = len(a | b)
                similarity = len(a & b) / union if union else 1.0
            if similarity >= t:
                count += 1
    return (n * (n - 1) // 2) / (count + epsilon)


def oracle_bleu_single(candidate: str, reference: str) -> float:
    """Straight-line BLEU-4 for one pair, same pinned smoothing scheme:
    add-one where an order has matches, 0.01/total floor where it has none,
    absent orders skipped."""
    cand = candidate.lower().split()
    ref = reference.lower().split()
    if not cand:
        return 0.0
    product = 1.0
    for n in range(1, 5):
        cand_ngrams = [tuple(cand[i : i + n]) for i in range(len(cand) - n + 1)]
        ref_ngrams = [tuple(ref[i : i + n]) for i in range(len(ref) - n + 1)]
        total = len(cand_ngrams)
        if total == 0:
            continue
        matches = 0
        remaining = list(ref_ngrams)
        for gram in cand_ngrams:
            if gram in remaining:
                matches += 1
                remaining.remove(gram)
        product *= (matches + 1) / (total + 1) if matches > 0 else 0.01 / total
    brevity = 1.0 if len(cand) >= len(ref) else math.exp(1.0 - len(ref) / len(cand))
    return 100.0 * brevity * product ** 0.25
