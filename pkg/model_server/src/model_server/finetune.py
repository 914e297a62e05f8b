"""Fine-tune a masked language model to predict the objects of triples.

Each triple becomes a cloze sentence (the relation's first template with
the object slot masked); the loss is masked-LM cross-entropy at the mask
position only. Objects that do not tokenize to a single vocabulary item
are excluded and their fraction reported. The checkpoint written is the
epoch with the best validation loss and can be served directly.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import torch
from torch.utils.data import DataLoader, Dataset
from transformers import AutoModelForMaskedLM, AutoTokenizer

logger = logging.getLogger(__name__)


def read_triples_tsv(path: str | Path) -> list[tuple[str, str, str]]:
    """Simple 3-column subject/relation/object TSV."""
    triples = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            columns = line.split("\t")
            if len(columns) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 columns")
            triples.append((columns[0].strip(), columns[1].strip(), columns[2].strip()))
    return triples


def load_templates(path: str | Path | None = None) -> dict[str, str]:
    """First cloze template per relation from a template-table document."""
    if path is None:
        text = resources.files("model_server.data").joinpath("templates.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    templates: dict[str, str] = {}
    relation = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            relation = line[1:-1].strip()
            continue
        key, _, value = line.partition(":")
        if key.strip() == "original" and relation is not None and relation not in templates:
            templates[relation] = value.strip()
    return templates


class _ClozeDataset(Dataset):
    def __init__(self, input_ids, attention_mask, labels):
        self.input_ids = input_ids
        self.attention_mask = attention_mask
        self.labels = labels

    def __len__(self):
        return len(self.input_ids)

    def __getitem__(self, index):
        return {
            "input_ids": self.input_ids[index],
            "attention_mask": self.attention_mask[index],
            "labels": self.labels[index],
        }


@dataclass
class FoldStats:
    total: int
    used: int

    @property
    def excluded_fraction(self) -> float:
        return 1 - self.used / self.total if self.total else 0.0


def _build_examples(triples, templates, tokenizer, max_length):
    """Masked sentences and single-token object labels; multi-token excluded."""
    sentences, object_ids = [], []
    for subject, relation, obj in triples:
        template = templates.get(relation)
        if template is None:
            continue
        ids = tokenizer(obj, add_special_tokens=False)["input_ids"]
        if len(ids) != 1:
            continue
        sentence = template.replace("[[SUBJ]]", subject).replace("[[OBJ]]", tokenizer.mask_token)
        sentences.append(" ".join(sentence.split()))
        object_ids.append(ids[0])

    if not sentences:
        return None, FoldStats(total=len(triples), used=0)
    encoded = tokenizer(
        sentences, return_tensors="pt", padding=True, truncation=True, max_length=max_length
    )
    mask_positions = encoded["input_ids"] == tokenizer.mask_token_id
    keep = (mask_positions.sum(dim=1) == 1).nonzero().flatten()  # mask survived truncation
    input_ids = encoded["input_ids"][keep]
    attention_mask = encoded["attention_mask"][keep]
    labels = torch.full_like(input_ids, -100)
    labels[input_ids == tokenizer.mask_token_id] = torch.tensor(
        [object_ids[i] for i in keep.tolist()]
    )
    stats = FoldStats(total=len(triples), used=len(keep))
    if not len(keep):
        return None, stats
    return _ClozeDataset(input_ids, attention_mask, labels), stats


@torch.no_grad()
def _validation_loss(model, loader, device) -> float:
    model.eval()
    total, batches = 0.0, 0
    for batch in loader:
        output = model(**{k: v.to(device) for k, v in batch.items()})
        total += float(output.loss)
        batches += 1
    return total / batches if batches else float("inf")


def finetune(
    model_id: str,
    triples_train: str | Path,
    triples_val: str | Path,
    epochs: int,
    out_dir: str | Path,
    templates_path: str | Path | None = None,
    learning_rate: float = 3e-5,
    batch_size: int = 16,
    max_length: int = 64,
    seed: int = 0,
    device: str = "cpu",
) -> Path:
    """Train on the train fold, select by validation loss, save a checkpoint."""
    if epochs < 0:
        raise ValueError("epochs must be >= 0")
    train_triples = read_triples_tsv(triples_train)
    val_triples = read_triples_tsv(triples_val)
    overlap = set(train_triples) & set(val_triples)
    if overlap:
        raise ValueError(f"folds overlap on {len(overlap)} triple(s), e.g. {sorted(overlap)[0]}")

    torch.manual_seed(seed)
    random.seed(seed)
    templates = load_templates(templates_path)
    tokenizer = AutoTokenizer.from_pretrained(model_id)
    if tokenizer.mask_token_id is None:
        raise ValueError("fine-tuning needs a masked language model")
    model = AutoModelForMaskedLM.from_pretrained(model_id).to(device)

    train_set, train_stats = _build_examples(train_triples, templates, tokenizer, max_length)
    val_set, val_stats = _build_examples(val_triples, templates, tokenizer, max_length)
    logger.info(
        "train fold: %d/%d usable (%.1f%% excluded); val fold: %d/%d",
        train_stats.used, train_stats.total, 100 * train_stats.excluded_fraction,
        val_stats.used, val_stats.total,
    )
    if epochs > 0 and train_set is None:
        raise ValueError("no trainable examples: objects are multi-token or relations untemplated")

    best_state = {k: v.clone() for k, v in model.state_dict().items()}
    best_val = float("inf")
    history = []
    if epochs > 0:
        generator = torch.Generator().manual_seed(seed)
        train_loader = DataLoader(
            train_set, batch_size=batch_size, shuffle=True, generator=generator
        )
        val_loader = (
            DataLoader(val_set, batch_size=batch_size) if val_set is not None else None
        )
        optimizer = torch.optim.AdamW(model.parameters(), lr=learning_rate)
        if val_loader is not None:
            best_val = _validation_loss(model, val_loader, device)
        for epoch in range(epochs):
            model.train()
            epoch_loss, batches = 0.0, 0
            for batch in train_loader:
                optimizer.zero_grad()
                output = model(**{k: v.to(device) for k, v in batch.items()})
                output.loss.backward()
                optimizer.step()
                epoch_loss += float(output.loss)
                batches += 1
            val_loss = (
                _validation_loss(model, val_loader, device) if val_loader is not None else None
            )
            history.append(
                {"epoch": epoch, "train_loss": epoch_loss / max(batches, 1), "val_loss": val_loss}
            )
            logger.info("epoch %d: %s", epoch, history[-1])
            if val_loss is None or val_loss < best_val:
                best_val = val_loss if val_loss is not None else best_val
                best_state = {k: v.clone() for k, v in model.state_dict().items()}
        model.load_state_dict(best_state)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(out_dir)
    tokenizer.save_pretrained(out_dir)
    metadata = {
        "base_model": model_id,
        "epochs": epochs,
        "learning_rate": learning_rate,
        "batch_size": batch_size,
        "seed": seed,
        "train_total": train_stats.total,
        "train_used": train_stats.used,
        "train_excluded_fraction": train_stats.excluded_fraction,
        "val_total": val_stats.total,
        "val_used": val_stats.used,
        "history": history,
    }
    with open(out_dir / "finetune_metadata.json", "w", encoding="utf-8") as handle:
        json.dump(metadata, handle, indent=2, sort_keys=True)
    return out_dir
