"""Scoring and benchmark orchestration.

score_* functions are pure: text in, numbers out, every metric setting echoed
into the report header so numbers are self-describing. The bench runner wraps
the pipeline per draft, is resumable (completed documents are never
recomputed), and keeps going past per-document failures.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .metrics import (
    BLEU_SPEC,
    IrrConfig,
    IrrUndefinedError,
    ROUGE_SPEC,
    STOPWORD_LIST_ID,
    bleu,
    counter_from_config,
    irr_of_text,
    length_stats,
    rouge_f1,
)

SCHEMA_VERSION_REPORT = "bench-report-v1"


class AlignmentError(Exception):
    def __init__(self, missing_refs: list[str], missing_gens: list[str]):
        self.missing_refs = missing_refs
        self.missing_gens = missing_gens
        parts = []
        if missing_refs:
            parts.append(f"no reference for: {sorted(missing_refs)}")
        if missing_gens:
            parts.append(f"no generated doc for: {sorted(missing_gens)}")
        super().__init__("; ".join(parts))


def irr_label(t: float) -> str:
    return "irr_t" + f"{t:g}".replace(".", "")


@dataclass(frozen=True)
class MetricConfig:
    thresholds: tuple[float, ...] = (0.2, 0.4)
    epsilon: float = 1e-6
    cap: float | None = None
    counter_config: dict | None = None

    def header(self) -> dict:
        counter = counter_from_config(self.counter_config)
        return {
            "thresholds": list(self.thresholds),
            "epsilon": self.epsilon,
            "cap": self.cap,
            "stopword_list_id": STOPWORD_LIST_ID,
            "token_counter": counter.counter_id,
            "bleu": BLEU_SPEC,
            "rouge": ROUGE_SPEC,
        }


def score_document(doc_id: str, candidate: str, reference: str, cfg: MetricConfig) -> dict:
    counter = counter_from_config(cfg.counter_config)
    row: dict = {
        "doc_id": doc_id,
        "failed": False,
        "bleu": bleu([candidate], [reference]),
        "rouge1": rouge_f1(candidate, reference, "r1"),
        "rouge2": rouge_f1(candidate, reference, "r2"),
        "rougel": rouge_f1(candidate, reference, "rl"),
        "tokens": length_stats(candidate, counter).tokens,
    }
    for t in cfg.thresholds:
        irr_cfg = IrrConfig(t=t, epsilon=cfg.epsilon, cap=cfg.cap)
        try:
            result = irr_of_text(candidate, irr_cfg)
            row[irr_label(t)] = result.value
            row[irr_label(t) + "_pair_sum"] = result.pair_sum
            row[irr_label(t) + "_total_pairs"] = result.total_pairs
        except IrrUndefinedError:
            row[irr_label(t)] = None
    return row


@dataclass
class BenchReport:
    header: dict
    rows: list[dict] = field(default_factory=list)

    @property
    def scored_rows(self) -> list[dict]:
        return [r for r in self.rows if not r.get("failed")]

    def aggregates(self) -> dict:
        rows = self.scored_rows
        if not rows:
            return {}
        keys = [
            k
            for k, v in rows[0].items()
            if isinstance(v, (int, float)) and not isinstance(v, bool)
        ]
        means: dict = {}
        for key in keys:
            values = [r[key] for r in rows if isinstance(r.get(key), (int, float))]
            if values:
                means[key] = sum(values) / len(values)
        return means

    def to_record(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION_REPORT,
            "header": self.header,
            "rows": self.rows,
            "aggregates": self.aggregates(),
            "counts": {
                "scored": len(self.scored_rows),
                "failed": len(self.rows) - len(self.scored_rows),
            },
        }

    def table_columns(self) -> list[str]:
        cols = ["bleu", "rouge1", "rouge2", "rougel"]
        for t in self.header.get("thresholds", []):
            cols.append(irr_label(t))
        cols.append("tokens")
        return cols

    def to_table(self) -> str:
        cols = self.table_columns()
        lines = []
        lines.append("metric config: " + json.dumps(self.header, sort_keys=True))
        head = f"{'doc_id':<24}" + "".join(f"{c:>14}" for c in cols)
        lines.append(head)
        lines.append("-" * len(head))

        def fmt(value) -> str:
            if value is None:
                return f"{'-':>14}"
            if isinstance(value, float):
                return f"{value:>14.2f}"
            return f"{value:>14}"

        for row in self.rows:
            if row.get("failed"):
                lines.append(f"{row['doc_id']:<24}" + f"{'FAILED':>14}" + f" {row.get('error', '')}")
                continue
            lines.append(f"{row['doc_id']:<24}" + "".join(fmt(row.get(c)) for c in cols))
        lines.append("-" * len(head))
        aggregates = self.aggregates()
        lines.append(f"{'mean':<24}" + "".join(fmt(aggregates.get(c)) for c in cols))
        counts = self.to_record()["counts"]
        lines.append(f"scored {counts['scored']} document(s), {counts['failed']} failed")
        return "\n".join(lines) + "\n"

    def save(self, out_dir: Path | str) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(
            json.dumps(self.to_record(), indent=2, sort_keys=True) + "\n", "utf-8"
        )
        (out_dir / "report.txt").write_text(self.to_table(), "utf-8")


def report_from_record(record: dict) -> BenchReport:
    return BenchReport(header=record["header"], rows=record["rows"])


def score_pairs(pairs: dict[str, tuple[str, str]], cfg: MetricConfig) -> BenchReport:
    report = BenchReport(header=cfg.header())
    for doc_id in sorted(pairs):
        candidate, reference = pairs[doc_id]
        report.rows.append(score_document(doc_id, candidate, reference, cfg))
    return report


def _doc_texts(directory: Path) -> dict[str, str]:
    return {
        path.stem: path.read_text("utf-8")
        for path in sorted(directory.glob("*.txt"))
    }


def score_directories(
    generated_dir: Path | str, reference_dir: Path | str, cfg: MetricConfig
) -> BenchReport:
    """Score aligned documents by doc_id (file stem). Pure: no network."""
    generated = _doc_texts(Path(generated_dir))
    references = _doc_texts(Path(reference_dir))
    missing_refs = sorted(set(generated) - set(references))
    missing_gens = sorted(set(references) - set(generated))
    if missing_refs or missing_gens:
        raise AlignmentError(missing_refs, missing_gens)
    return score_pairs(
        {doc_id: (generated[doc_id], references[doc_id]) for doc_id in generated}, cfg
    )
