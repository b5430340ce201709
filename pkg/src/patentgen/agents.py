"""Agent roles: the five short-component writers, the planner, the
description writer and the examiner.

Each role binds a prompt template, an output-parse contract and a retry
policy to a backend. On a parse failure the agent re-asks the model with the
bad response and a format reminder appended, up to parse_retry_max extra
calls, before surfacing the error.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .core import (
    Draft,
    GuidelineNode,
    PGTree,
    Reference,
    RetrievedContext,
    ReviewVerdict,
    RunRecord,
    render_draft,
    render_pgtree,
    render_reference,
)
from .gateway import ChatMessage, ChatRequest, LlmGateway
from .prompts import PromptRegistry, default_registry
from .tags import TagSpec, TagError, extract_sections, extract_tag


class AgentError(Exception):
    pass


class EmptyGenerationError(AgentError):
    def __init__(self, role: str):
        super().__init__(f"agent {role!r} produced empty output")


class MalformedVerdictError(AgentError):
    def __init__(self, detail: str):
        super().__init__(f"examiner verdict unparseable after retries: {detail}")


class IncompleteReferenceError(AgentError):
    def __init__(self, missing: list[str]):
        self.missing = missing
        super().__init__(f"reference bundle is incomplete, missing: {missing}")


class ParseRetryError(Exception):
    """Parse failure that warrants re-asking the model."""


COMPONENT_ROLES = ("title", "abstract", "background", "summary", "claims")
COMPONENT_TAGS = {
    "title": "Title",
    "abstract": "Abstract",
    "background": "Background",
    "summary": "Summary",
    "claims": "Claims",
}

# Request tags keyed by operation; these are the call-log role labels.
TAG_PLAN = "planner"
TAG_EXPAND = "section_expand"
TAG_RETRIEVE = "retrieval"
TAG_WRITE = "description_write"
TAG_REFINE = "description_refine"
TAG_REVIEW = "examiner_review"

# Component writers, planner and examiner emit short texts; description
# subsections get twice the room.
DEFAULT_MAX_TOKENS = {
    "title": 4096,
    "abstract": 4096,
    "background": 4096,
    "summary": 4096,
    "claims": 4096,
    "planner": 4096,
    "examiner": 4096,
    "description": 8192,
}

_FILLER_RE = re.compile(
    r"^(sure|certainly|of course|okay|ok|here is|here's|here are)\b", re.IGNORECASE
)


def strip_leading_filler(text: str) -> str:
    """Drop a single conversational lead-in line; keep everything else verbatim."""
    stripped = text.strip()
    lines = stripped.split("\n")
    if len(lines) > 1 and _FILLER_RE.match(lines[0].strip()):
        rest = "\n".join(lines[1:]).lstrip("\n").strip()
        if rest:
            return rest
    return stripped


@dataclass(frozen=True)
class AgentBinding:
    role: str
    template_id: str
    backend: str = "default"
    model_id: str | None = None
    temperature: float | None = None
    top_p: float | None = None
    max_tokens: int | None = None
    parse_retry_max: int = 2


def default_bindings() -> dict[str, AgentBinding]:
    bindings = {
        role: AgentBinding(role=role, template_id=f"{role}_writer")
        for role in COMPONENT_ROLES
    }
    bindings["planner"] = AgentBinding(role="planner", template_id="planner")
    bindings["description"] = AgentBinding(role="description", template_id="description_write")
    bindings["examiner"] = AgentBinding(role="examiner", template_id="examiner_review")
    return bindings


@dataclass
class AgentRuntime:
    """Wires bindings to gateways for the duration of one run."""

    gateways: dict[str, LlmGateway]
    bindings: dict[str, AgentBinding] = field(default_factory=default_bindings)
    registry: PromptRegistry = field(default_factory=default_registry)
    recorder: RunRecord | None = None

    def gateway_for(self, binding: AgentBinding) -> LlmGateway:
        try:
            return self.gateways[binding.backend]
        except KeyError:
            raise AgentError(
                f"role {binding.role!r} names unknown backend {binding.backend!r}"
            ) from None

    def _request(self, binding: AgentBinding, messages: list[ChatMessage], tag: str) -> ChatRequest:
        gateway = self.gateway_for(binding)
        return ChatRequest(
            model_id=binding.model_id or gateway.config.model_id,
            messages=tuple(messages),
            temperature=0.5 if binding.temperature is None else binding.temperature,
            top_p=0.9 if binding.top_p is None else binding.top_p,
            max_tokens=binding.max_tokens or DEFAULT_MAX_TOKENS.get(binding.role, 4096),
            request_tag=tag,
        )

    def complete_parsed(self, binding, prompt: str, tag: str, parse_fn, reminder: str):
        """Call the model and parse, re-asking with a format reminder on
        parse failures until parse_retry_max is exhausted."""
        gateway = self.gateway_for(binding)
        messages = [ChatMessage("user", prompt)]
        last_exc: Exception | None = None
        for _ in range(binding.parse_retry_max + 1):
            resp = gateway.complete(self._request(binding, messages, tag), recorder=self.recorder)
            try:
                return parse_fn(resp.content)
            except (TagError, ParseRetryError) as exc:
                last_exc = exc
                messages = messages + [
                    ChatMessage("assistant", resp.content),
                    ChatMessage("user", reminder),
                ]
        assert last_exc is not None
        raise last_exc

    def complete_raw(self, binding: AgentBinding, prompt: str, tag: str) -> str:
        """One untagged call; the whole response body is the payload."""
        gateway = self.gateway_for(binding)
        resp = gateway.complete(
            self._request(binding, [ChatMessage("user", prompt)], tag), recorder=self.recorder
        )
        return resp.content.strip()

    # --- short components ---------------------------------------------

    def write_component(self, role: str, draft: Draft) -> str:
        if role not in COMPONENT_ROLES:
            raise AgentError(f"{role!r} is not a short-component role")
        binding = self.bindings[role]
        tag = COMPONENT_TAGS[role]
        prompt = self.registry.render(binding.template_id, draft=render_draft(draft))

        def parse(content: str) -> str:
            text = extract_tag(content, TagSpec(tag))
            if not text:
                raise EmptyGenerationError(role)
            return text

        reminder = (
            "Your previous response did not follow the required format. "
            f"Respond again and wrap the {role} exactly as: <{tag}>...</{tag}>"
        )
        return self.complete_parsed(binding, prompt, role, parse, reminder)

    # --- planning --------------------------------------------------------

    def plan_first_level(self, draft: Draft) -> list[tuple[int, str]]:
        binding = self.bindings["planner"]
        prompt = self.registry.render("planner", draft=render_draft(draft))
        reminder = (
            "Your previous response did not follow the required format. Respond again "
            "using <Section-1> ... </Section-1>, <Section-2> ... </Section-2> blocks "
            "numbered consecutively from 1."
        )
        return self.complete_parsed(
            binding, prompt, TAG_PLAN, lambda c: extract_sections(c), reminder
        )

    def expand_section(self, draft: Draft, section_overview: str) -> list[tuple[int, str]]:
        binding = self.bindings["planner"]
        prompt = self.registry.render(
            "section_expand", draft=render_draft(draft), section_overview=section_overview
        )
        reminder = (
            "Your previous response did not follow the required format. Respond again "
            "using <Subsection-1> ... </Subsection-1> blocks numbered consecutively from 1."
        )
        return self.complete_parsed(
            binding, prompt, TAG_EXPAND, lambda c: extract_sections(c, "Subsection"), reminder
        )

    # --- description writing ------------------------------------------

    def retrieve(self, node: GuidelineNode, ref: Reference) -> RetrievedContext:
        if not ref.complete:
            raise IncompleteReferenceError(ref.missing_parts())
        binding = self.bindings["description"]
        prompt = self.registry.render(
            "retrieval", reference=render_reference(ref), guideline=node.guideline_text
        )
        gateway = self.gateway_for(binding)
        resp = gateway.complete(
            self._request(binding, [ChatMessage("user", prompt)], TAG_RETRIEVE),
            recorder=self.recorder,
        )
        content = resp.content.strip()
        return RetrievedContext(
            node=node.node_id, content=content, empty_retrieval=not content
        )

    def write_subsection(
        self, node: GuidelineNode, retrieved: RetrievedContext, tree: PGTree, draft: Draft
    ) -> str:
        if not tree.contains(node):
            raise AgentError(f"guideline node {node.node_id} does not belong to the tree")
        binding = self.bindings["description"]
        prompt = self.registry.render(
            "description_write",
            retrieved=retrieved.content,
            tree_overview=render_pgtree(tree),
            guideline=node.guideline_text,
        )
        gateway = self.gateway_for(binding)
        resp = gateway.complete(
            self._request(binding, [ChatMessage("user", prompt)], TAG_WRITE),
            recorder=self.recorder,
        )
        text = strip_leading_filler(resp.content)
        if not text:
            raise EmptyGenerationError("description")
        return text

    def refine(self, node: GuidelineNode, subsection: str, feedback: str, tree: PGTree) -> str:
        if not feedback.strip():
            raise AgentError("refine requires non-empty feedback")
        binding = self.bindings["description"]
        prompt = self.registry.render(
            "description_refine",
            tree_overview=render_pgtree(tree),
            guideline=node.guideline_text,
            subsection=subsection,
            feedback=feedback,
        )
        gateway = self.gateway_for(binding)
        resp = gateway.complete(
            self._request(binding, [ChatMessage("user", prompt)], TAG_REFINE),
            recorder=self.recorder,
        )
        text = strip_leading_filler(resp.content)
        if not text:
            raise EmptyGenerationError("description")
        return text

    # --- review ----------------------------------------------------------

    def review(self, node: GuidelineNode, subsection: str, draft: Draft) -> ReviewVerdict:
        if not subsection.strip():
            raise AgentError("review requires a non-empty subsection")
        binding = self.bindings["examiner"]
        prompt = self.registry.render(
            "examiner_review",
            draft=render_draft(draft),
            guideline=node.guideline_text,
            subsection=subsection,
        )

        def parse(content: str) -> ReviewVerdict:
            result = extract_tag(content, TagSpec("Result"))
            advice = extract_tag(content, TagSpec("Advice"))
            if result not in ("Pass", "Fail"):
                raise ParseRetryError(f"verdict text {result!r}")
            if not advice:
                raise ParseRetryError("empty advice")
            return ReviewVerdict(result=result, advice=advice)

        reminder = (
            "Your previous response did not follow the required format. Respond again "
            "with <Result>Pass</Result> or <Result>Fail</Result>, and your advice in "
            "<Advice>...</Advice>."
        )
        try:
            return self.complete_parsed(binding, prompt, TAG_REVIEW, parse, reminder)
        except (TagError, ParseRetryError) as exc:
            raise MalformedVerdictError(str(exc)) from exc
