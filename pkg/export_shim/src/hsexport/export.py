"""Export everything a file backend needs from a pretrained masked LM.

Pure forward passes on a frozen checkpoint (eval mode, no gradients): one
raw little-endian float32 tensor file per text holding exactly
(L+1) * T * D values layer-major, the input-embedding matrix, per-token
output biases, and the prediction-head-transformed state at the mask
position for single-mask texts.  Tensors are written float32 regardless of
checkpoint precision (documented downcast: one wire dtype keeps readers
simple).  File writes are atomic (write to a temp name, then rename).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

FORMAT = "hs-export/v1"


@dataclass
class ExportManifest:
    model_name: str
    L: int
    D: int
    dtype: str = "f32le"
    embedding_dim: int | None = None
    vocab_file: str | None = None
    embedding_file: str | None = None
    output_bias_file: str | None = None
    entries: list[dict] = field(default_factory=list)
    skipped: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        out = {
            "format": FORMAT,
            "model_name": self.model_name,
            "L": self.L,
            "D": self.D,
            "dtype": self.dtype,
            "entries": self.entries,
            "skipped": self.skipped,
        }
        if self.embedding_dim is not None:
            out["embedding_dim"] = self.embedding_dim
        for key in ("vocab_file", "embedding_file", "output_bias_file"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _f32(tensor: torch.Tensor) -> bytes:
    return np.ascontiguousarray(tensor.detach().cpu().numpy(), dtype="<f4").tobytes()


def _mask_transform(model, last_hidden: torch.Tensor) -> torch.Tensor:
    """Apply the model's prediction-head transform (dense + act + norm)."""
    if hasattr(model, "cls") and hasattr(model.cls, "predictions"):
        return model.cls.predictions.transform(last_hidden)  # BERT family
    if hasattr(model, "lm_head") and hasattr(model.lm_head, "layer_norm"):
        head = model.lm_head  # RoBERTa family
        import torch.nn.functional as F

        return head.layer_norm(F.gelu(head.dense(last_hidden)))
    raise ValueError(
        f"cannot locate the prediction-head transform on {type(model).__name__}"
    )


def export_corpus(
    model_ref,
    texts: list[str],
    out_dir,
    include_embeddings: bool = True,
    include_mask_states: bool = True,
    include_vocab: bool = True,
) -> ExportManifest:
    """Run deterministic forward passes and write an hs-export/v1 directory.

    Texts exceeding the model's maximum length are skipped and listed in the
    manifest.  The same inputs produce byte-identical output files.
    """
    from transformers import AutoModelForMaskedLM, AutoTokenizer

    if not texts:
        raise ValueError("no texts to export")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    tokenizer = AutoTokenizer.from_pretrained(model_ref, use_fast=True)
    model = AutoModelForMaskedLM.from_pretrained(model_ref)
    model.eval()

    config = model.config
    layers = int(config.num_hidden_layers)
    dim = int(config.hidden_size)
    max_len = int(getattr(config, "max_position_embeddings", tokenizer.model_max_length))
    mask_id = tokenizer.mask_token_id

    manifest = ExportManifest(
        model_name=str(model_ref), L=layers, D=dim, embedding_dim=dim
    )

    if include_vocab:
        vocab = tokenizer.convert_ids_to_tokens(list(range(len(tokenizer.get_vocab()))))
        _atomic_write(out_dir / "vocab.txt", ("\n".join(vocab) + "\n").encode())
        manifest.vocab_file = "vocab.txt"
    if include_embeddings:
        _atomic_write(
            out_dir / "input_embeddings.f32", _f32(model.get_input_embeddings().weight)
        )
        manifest.embedding_file = "input_embeddings.f32"
        decoder = model.get_output_embeddings()
        if decoder is not None and decoder.bias is not None:
            _atomic_write(out_dir / "output_bias.f32", _f32(decoder.bias))
            manifest.output_bias_file = "output_bias.f32"

    with torch.no_grad():
        for i, text in enumerate(texts):
            entry_id = f"t{i:05d}"
            enc = tokenizer(
                text,
                return_offsets_mapping=True,
                return_special_tokens_mask=True,
                return_tensors="pt",
            )
            T = enc["input_ids"].shape[1]
            if T > max_len:
                manifest.skipped.append({"id": entry_id, "text": text, "reason": f"length {T} > {max_len}"})
                continue
            out = model(
                input_ids=enc["input_ids"],
                attention_mask=enc["attention_mask"],
                output_hidden_states=True,
            )
            hidden = torch.stack([h[0] for h in out.hidden_states])  # (L+1, T, D)
            files = {"hidden": f"{entry_id}.hidden.f32"}
            payload = _f32(hidden)
            assert len(payload) == 4 * (layers + 1) * T * dim
            _atomic_write(out_dir / files["hidden"], payload)

            ids = enc["input_ids"][0].tolist()
            if include_mask_states and mask_id is not None and ids.count(mask_id) == 1:
                pos = ids.index(mask_id)
                transformed = _mask_transform(model, out.hidden_states[-1][0])[pos]
                files["mask_state"] = f"{entry_id}.mask.f32"
                _atomic_write(out_dir / files["mask_state"], _f32(transformed))

            manifest.entries.append(
                {
                    "id": entry_id,
                    "text": text,
                    "T": int(T),
                    "ids": ids,
                    "tokens": tokenizer.convert_ids_to_tokens(ids),
                    "offsets": [list(map(int, o)) for o in enc["offset_mapping"][0].tolist()],
                    "special_mask": [int(x) for x in enc["special_tokens_mask"][0].tolist()],
                    "files": files,
                }
            )

    _atomic_write(
        out_dir / "manifest.json",
        (json.dumps(manifest.to_json(), indent=2, sort_keys=True) + "\n").encode(),
    )
    return manifest
