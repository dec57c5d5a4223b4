import math
from dataclasses import dataclass
from typing import Optional

import torch
from torch import nn
from torch.nn import functional as F

from dao.model.config import ModelConfig
from exceptions import SequenceTooLongError

INIT_STD = 0.02


@dataclass
class EncoderOutput:
    hidden: torch.Tensor
    attentions: list


class SelfAttention(nn.Module):
    def __init__(self, d: int, heads: int, dropout: float):
        super().__init__()
        self.heads = heads
        self.head_dim = d // heads
        self.qkv = nn.Linear(d, 3 * d)
        self.out = nn.Linear(d, d)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor, key_mask: torch.Tensor) -> tuple:
        batch, length, d = x.shape
        q, k, v = self.qkv(x).split(d, dim=-1)
        q, k, v = (t.view(batch, length, self.heads, self.head_dim).transpose(1, 2) for t in (q, k, v))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        scores = scores.masked_fill(~key_mask[:, None, None, :], float('-inf'))
        weights = F.softmax(scores, dim=-1)
        mixed = self.dropout(weights) @ v
        mixed = mixed.transpose(1, 2).reshape(batch, length, d)
        return self.out(mixed), weights


class EncoderLayer(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.attention_norm = nn.LayerNorm(config.d)
        self.attention = SelfAttention(config.d, config.heads, config.dropout)
        self.feedforward_norm = nn.LayerNorm(config.d)
        self.feedforward = nn.Sequential(
            nn.Linear(config.d, config.ff_mult * config.d),
            nn.GELU(),
            nn.Linear(config.ff_mult * config.d, config.d),
        )
        self.dropout = nn.Dropout(config.dropout)

    def forward(self, x: torch.Tensor, key_mask: torch.Tensor) -> tuple:
        mixed, weights = self.attention(self.attention_norm(x), key_mask)
        x = x + self.dropout(mixed)
        x = x + self.dropout(self.feedforward(self.feedforward_norm(x)))
        return x, weights


class RelationNetwork(nn.Module):
    """
    Небольшой трансформер-энкодер с тремя головами:
    NRC (есть ли отношение), EC (важность токенов) и RC (метка отношения).
    """

    def __init__(self, config: ModelConfig, vocab_size: int, num_classes: int):
        super().__init__()
        self.config = config
        self.token_embedding = nn.Embedding(vocab_size, config.d)
        self.position_embedding = nn.Embedding(config.max_seq_len, config.d)
        self.embedding_dropout = nn.Dropout(config.dropout)
        self.layers = nn.ModuleList(EncoderLayer(config) for _ in range(config.layers))
        self.nrc_head = nn.Linear(config.d, 1)
        self.ec_head = nn.Linear(config.d, 1)
        self.rc_head = nn.Linear(3 * config.d, num_classes)
        self.apply(self._init_weights)

    @staticmethod
    def _init_weights(module: nn.Module) -> None:
        """
        Начальные веса: нормальное распределение для линейных слоев и эмбеддингов.
        """
        if isinstance(module, (nn.Linear, nn.Embedding)):
            nn.init.normal_(module.weight, std=INIT_STD)
        if isinstance(module, nn.Linear):
            nn.init.zeros_(module.bias)

    def embed(self, ids: torch.Tensor) -> torch.Tensor:
        return self.token_embedding(ids)

    def encode(self, ids: torch.Tensor, key_mask: torch.Tensor,
               embeddings: Optional[torch.Tensor] = None) -> EncoderOutput:
        """
        Кодирует последовательности. key_mask задает позиции, на которые разрешено внимание.

        :param ids: Индексы токенов [B, T].
        :param key_mask: Булева маска ключей внимания [B, T].
        :param embeddings: Готовые эмбеддинги токенов [B, T, d] вместо ids (для градиентов по входу).
        :return: EncoderOutput со скрытыми состояниями и весами внимания каждого слоя.
        """
        length = ids.shape[1]
        if length > self.config.max_seq_len:
            raise SequenceTooLongError(f'sequence of length {length} exceeds max_seq_len={self.config.max_seq_len}')
        if embeddings is None:
            embeddings = self.embed(ids)
        positions = torch.arange(length, device=ids.device)
        x = self.embedding_dropout(embeddings + self.position_embedding(positions)[None])
        attentions = []
        for layer in self.layers:
            x, weights = layer(x, key_mask)
            attentions.append(weights)
        return EncoderOutput(x, attentions)

    def nrc_score(self, hidden: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.nrc_head(hidden[:, 0])).squeeze(-1)

    def ec_scores(self, hidden: torch.Tensor, context_mask: Optional[torch.Tensor] = None) -> torch.Tensor:
        """
        Вероятности важности для каждой позиции. Позиции вне context_mask ([CLS], сущности, паддинг) обнуляются.
        """
        scores = torch.sigmoid(self.ec_head(hidden)).squeeze(-1)
        if context_mask is not None:
            scores = scores * context_mask.to(scores.dtype)
        return scores

    @staticmethod
    def pool(hidden: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        weights = mask.to(hidden.dtype)
        total = (hidden * weights.unsqueeze(-1)).sum(dim=1)
        return total / weights.sum(dim=1, keepdim=True).clamp_min(1.0)

    def rc_logits(self, hidden: torch.Tensor, explanation_mask: torch.Tensor, subj_mask: torch.Tensor,
                  obj_mask: torch.Tensor) -> torch.Tensor:
        features = torch.cat([
            self.pool(hidden, explanation_mask),
            self.pool(hidden, subj_mask),
            self.pool(hidden, obj_mask),
        ], dim=-1)
        return self.rc_head(features)

    def rc_distribution(self, ids: torch.Tensor, explanation_mask: torch.Tensor, subj_mask: torch.Tensor,
                        obj_mask: torch.Tensor, embeddings: Optional[torch.Tensor] = None) -> torch.Tensor:
        """
        Распределение по меткам отношений. Предложение перекодируется так, что внимание видит только
        отмеченные токены контекста и токены сущностей, поэтому прочие токены не влияют на результат.
        """
        key_mask = explanation_mask | subj_mask | obj_mask
        hidden = self.encode(ids, key_mask, embeddings).hidden
        return F.softmax(self.rc_logits(hidden, explanation_mask, subj_mask, obj_mask), dim=-1)
