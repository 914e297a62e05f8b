import json
from pathlib import Path

import pytest
import torch
from transformers import (
    AutoTokenizer,
    BertConfig,
    BertForMaskedLM,
    GPT2Config,
    GPT2LMHeadModel,
)

WORDS = [
    "butter", "can", "be", "made", "of", "milk", "wood", "metal", "glass",
    "house", "brick", "cat", "dog", "animal", "is", "a", "an", "the", "cheap",
    "expensive", "inexpensive", "and", "are", "opposite", "same", "with",
    "ice", "cream", "consists", "from", "thing", ".", ",",
]


def build_tiny_bert(directory: Path, seed: int = 0) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + WORDS
    (directory / "vocab.txt").write_text("\n".join(vocab) + "\n")
    (directory / "tokenizer_config.json").write_text(
        json.dumps({"tokenizer_class": "BertTokenizer", "do_lower_case": True})
    )
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=64,
    )
    torch.manual_seed(seed)
    model = BertForMaskedLM(config)
    model.save_pretrained(directory)
    return directory


def build_tiny_gpt(directory: Path, seed: int = 0) -> Path:
    from tokenizers import pre_tokenizers

    directory.mkdir(parents=True, exist_ok=True)
    alphabet = sorted(pre_tokenizers.ByteLevel.alphabet())
    vocab = {symbol: index for index, symbol in enumerate(alphabet)}
    vocab["<|endoftext|>"] = len(vocab)
    (directory / "vocab.json").write_text(json.dumps(vocab))
    (directory / "merges.txt").write_text("#version: 0.2\n")
    (directory / "tokenizer_config.json").write_text(
        json.dumps({"tokenizer_class": "GPT2Tokenizer"})
    )
    eot = vocab["<|endoftext|>"]
    config = GPT2Config(
        vocab_size=len(vocab),
        n_embd=32,
        n_layer=2,
        n_head=2,
        n_positions=256,
        bos_token_id=eot,
        eos_token_id=eot,
    )
    torch.manual_seed(seed)
    model = GPT2LMHeadModel(config)
    model.save_pretrained(directory)
    tokenizer = AutoTokenizer.from_pretrained(directory)
    tokenizer.save_pretrained(directory)
    return directory


@pytest.fixture(scope="session")
def tiny_bert_dir(tmp_path_factory) -> Path:
    return build_tiny_bert(tmp_path_factory.mktemp("tiny-bert"))


@pytest.fixture(scope="session")
def tiny_gpt_dir(tmp_path_factory) -> Path:
    return build_tiny_gpt(tmp_path_factory.mktemp("tiny-gpt"))


@pytest.fixture(scope="session")
def masked_backend(tiny_bert_dir):
    from model_server.scoring import MaskedModel

    return MaskedModel(str(tiny_bert_dir), max_length=64)


@pytest.fixture(scope="session")
def causal_backend(tiny_gpt_dir):
    from model_server.scoring import CausalModel

    return CausalModel(str(tiny_gpt_dir), max_length=128)


def write_folds(directory: Path) -> tuple[Path, Path]:
    train = directory / "train.tsv"
    val = directory / "val.tsv"
    train.write_text(
        "butter\tMadeOf\tmilk\n"
        "house\tMadeOf\twood\n"
        "house\tMadeOf\tbrick\n"
        "cat\tIsA\tanimal\n"
        "cheap\tSynonym\tinexpensive\n"
    )
    val.write_text(
        "ice cream\tMadeOf\tmilk\n"
        "dog\tIsA\tanimal\n"
    )
    return train, val
