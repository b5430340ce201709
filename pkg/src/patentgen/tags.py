"""Strict parsing of tagged model output.

Model responses carry their payload inside XML-ish tags (`<Title>...</Title>`,
`<Section-1>...</Section-1>`). Tag names match case-sensitively; whitespace
inside a tag is trimmed; nesting or unbalanced markers are rejected rather
than guessed at.
"""

from __future__ import annotations

import re
from dataclasses import dataclass


class TagError(Exception):
    """Base class for tag-protocol parse failures."""


class TagMissingError(TagError):
    def __init__(self, tag_name: str):
        self.tag_name = tag_name
        super().__init__(f"tag <{tag_name}> not found in output")


class TagDuplicatedError(TagError):
    def __init__(self, tag_name: str, count: int):
        self.tag_name = tag_name
        self.count = count
        super().__init__(f"tag <{tag_name}> expected exactly once, found {count}")


class TagUnclosedError(TagError):
    def __init__(self, tag_name: str, detail: str = "unbalanced tag markers"):
        self.tag_name = tag_name
        super().__init__(f"tag <{tag_name}>: {detail}")


class NoSectionsError(TagError):
    def __init__(self, tag_base: str):
        self.tag_base = tag_base
        super().__init__(f"no <{tag_base}-k> blocks found in output")


class NonContiguousIndicesError(TagError):
    def __init__(self, tag_base: str, found: list[int]):
        self.tag_base = tag_base
        self.found = found
        super().__init__(
            f"<{tag_base}-k> indices must start at 1 and increase by 1, found {found}"
        )


EXACTLY_ONE = "exactly_one"
ONE_OR_MORE = "one_or_more"


@dataclass(frozen=True)
class TagSpec:
    tag_name: str
    multiplicity: str = EXACTLY_ONE

    def __post_init__(self):
        if self.multiplicity not in (EXACTLY_ONE, ONE_OR_MORE):
            raise ValueError(f"unknown multiplicity {self.multiplicity!r}")


def _paired_contents(output: str, tag_name: str) -> list[str]:
    """Return inner contents of every well-formed <tag>...</tag> pair.

    Raises TagUnclosedError on any stray, nested or out-of-order marker.
    """
    open_marker = f"<{tag_name}>"
    close_marker = f"</{tag_name}>"
    events: list[tuple[int, str]] = []
    for match in re.finditer(re.escape(open_marker), output):
        events.append((match.start(), "open"))
    for match in re.finditer(re.escape(close_marker), output):
        events.append((match.start(), "close"))
    events.sort()

    contents: list[str] = []
    open_at: int | None = None
    for pos, kind in events:
        if kind == "open":
            if open_at is not None:
                raise TagUnclosedError(tag_name, "nested same-name tag")
            open_at = pos + len(open_marker)
        else:
            if open_at is None:
                raise TagUnclosedError(tag_name, "closing marker without opener")
            contents.append(output[open_at:pos])
            open_at = None
    if open_at is not None:
        raise TagUnclosedError(tag_name, "opening marker never closed")
    return contents


def extract_tag(output: str, spec: TagSpec) -> str | list[str]:
    """Extract trimmed tag contents per the spec's multiplicity."""
    contents = [c.strip() for c in _paired_contents(output, spec.tag_name)]
    if not contents:
        raise TagMissingError(spec.tag_name)
    if spec.multiplicity == EXACTLY_ONE:
        if len(contents) > 1:
            raise TagDuplicatedError(spec.tag_name, len(contents))
        return contents[0]
    return contents


def wrap_tag(content: str, tag_name: str) -> str:
    return f"<{tag_name}>{content}</{tag_name}>"


def extract_sections(output: str, tag_base: str = "Section") -> list[tuple[int, str]]:
    """Parse all <Base-k>...</Base-k> blocks, requiring indices 1..m in order."""
    open_re = re.compile(rf"<{re.escape(tag_base)}-(\d+)>")
    close_re = re.compile(rf"</{re.escape(tag_base)}-(\d+)>")
    events: list[tuple[int, str, int, int]] = []
    for match in open_re.finditer(output):
        events.append((match.start(), "open", int(match.group(1)), match.end()))
    for match in close_re.finditer(output):
        events.append((match.start(), "close", int(match.group(1)), match.end()))
    events.sort()

    blocks: list[tuple[int, str]] = []
    open_index: int | None = None
    open_end = 0
    for pos, kind, index, end in events:
        if kind == "open":
            if open_index is not None:
                raise TagUnclosedError(f"{tag_base}-{open_index}", "nested block")
            open_index, open_end = index, end
        else:
            if open_index is None:
                raise TagUnclosedError(f"{tag_base}-{index}", "closing marker without opener")
            if index != open_index:
                raise TagUnclosedError(
                    f"{tag_base}-{open_index}", f"closed by mismatched index {index}"
                )
            blocks.append((index, output[open_end:pos].strip()))
            open_index = None
    if open_index is not None:
        raise TagUnclosedError(f"{tag_base}-{open_index}", "opening marker never closed")

    if not blocks:
        raise NoSectionsError(tag_base)
    found = [k for k, _ in blocks]
    if found != list(range(1, len(found) + 1)):
        raise NonContiguousIndicesError(tag_base, found)
    return blocks


def render_sections(blocks: list[tuple[int, str]], tag_base: str = "Section") -> str:
    """Inverse of extract_sections; used when exporting collected trees."""
    return "\n\n".join(f"<{tag_base}-{k}> {text} </{tag_base}-{k}>" for k, text in blocks)
