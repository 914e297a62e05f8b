"""Relation templates: parsing the template file, instantiation, clauses.

Templates carry the literal placeholders ``[[SUBJ]]`` and ``[[OBJ]]``.
Each relation has an ordered list of cloze templates (``original:``) and one
verbalization template (``clause:``) used for knowledge integration, where
substituting "which" for the subject yields a relative clause.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .errors import ConfigurationError, TemplateError

SUBJ = "[[SUBJ]]"
OBJ = "[[OBJ]]"


def _check_placeholders(text: str, *, need_subj: bool = True) -> None:
    if need_subj and text.count(SUBJ) != 1:
        raise TemplateError(f"template must contain {SUBJ} exactly once: {text!r}")
    if text.count(OBJ) != 1:
        raise TemplateError(f"template must contain {OBJ} exactly once: {text!r}")


@dataclass(frozen=True)
class RelationTemplate:
    """Cloze templates and the integration clause for one relation."""

    relation: str
    originals: tuple[str, ...]
    clause: str

    def __post_init__(self):
        if not self.originals:
            raise TemplateError(f"relation {self.relation!r} has no templates")
        for text in self.originals:
            _check_placeholders(text)
        _check_placeholders(self.clause)

    def suffix_indices(self) -> list[int]:
        """Indices of templates whose object slot is the final content token."""
        return [
            i
            for i, text in enumerate(self.originals)
            if text.rstrip(" .!?").endswith(OBJ)
        ]


def instantiate(template: str, subject: str, object_or_mask: str) -> str:
    """Fill both placeholders and collapse runs of whitespace."""
    _check_placeholders(template)
    filled = template.replace(SUBJ, subject).replace(OBJ, object_or_mask)
    return " ".join(filled.split())


def relative_clause(
    relation: str, obj: str, templates: Mapping[str, RelationTemplate]
) -> str:
    """Verbalize (relation, object) as a "which ..." relative clause."""
    template = templates.get(relation)
    if template is None:
        raise ConfigurationError(f"no clause template for relation {relation!r}")
    return instantiate(template.clause, "which", obj)


def verbalize(
    relation: str, subject: str, obj: str, templates: Mapping[str, RelationTemplate]
) -> str:
    """Verbalize a full triple as a plain statement (used for @highlight lines)."""
    template = templates.get(relation)
    if template is None:
        raise ConfigurationError(f"no clause template for relation {relation!r}")
    return instantiate(template.clause, subject, obj)


def parse_templates(text: str, source: str = "<string>") -> dict[str, RelationTemplate]:
    """Parse the sectioned template document into RelationTemplate values."""
    templates: dict[str, RelationTemplate] = {}
    relation: str | None = None
    originals: list[str] = []
    clause: str | None = None

    def flush() -> None:
        nonlocal relation, originals, clause
        if relation is None:
            return
        if clause is None:
            raise TemplateError(f"{source}: relation {relation!r} lacks a clause: line")
        templates[relation] = RelationTemplate(
            relation=relation, originals=tuple(originals), clause=clause
        )
        relation, originals, clause = None, [], None

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            flush()
            relation = line[1:-1].strip()
            if not relation:
                raise TemplateError(f"{source}:{lineno}: empty relation header")
            continue
        key, sep, value = line.partition(":")
        if not sep or key.strip() not in ("original", "clause"):
            raise TemplateError(f"{source}:{lineno}: unrecognized line {line!r}")
        if relation is None:
            raise TemplateError(f"{source}:{lineno}: entry outside a relation section")
        if key.strip() == "original":
            originals.append(value.strip())
        else:
            if clause is not None:
                raise TemplateError(f"{source}:{lineno}: duplicate clause for {relation!r}")
            clause = value.strip()
    flush()
    return templates


def load_templates(path: str | Path | None = None) -> dict[str, RelationTemplate]:
    """Load a template file; with no path, the bundled default table."""
    if path is None:
        text = resources.files("clozeprobe.data").joinpath("templates.txt").read_text("utf-8")
        return parse_templates(text, source="templates.txt")
    path = Path(path)
    return parse_templates(path.read_text("utf-8"), source=str(path))


def check_relations_covered(
    templates: Mapping[str, RelationTemplate], relations: Iterable[str]
) -> None:
    missing = sorted(set(relations) - set(templates))
    if missing:
        raise ConfigurationError(f"relations without templates: {missing}")
