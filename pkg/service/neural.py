import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch
from torch.nn import functional as F

from constants import NO_RELATION, PAD_ID, VERSION
from dao.checkpoint import CheckpointDAO
from dao.model.config import ABLATE_EC, ABLATE_NRC, ModelConfig
from dao.model.instance import ExplanationLabels, RelationInstance, Vocabulary
from dao.model.prediction import Prediction
from exceptions import CheckpointError, SequenceTooLongError, TrainingError, UnknownLabelError
from service.corpus import mask_entities
from service.network import EncoderOutput, RelationNetwork

logger = logging.getLogger(__name__)

EC_THRESHOLD = 0.5


@dataclass
class Batch:
    instances: list
    ids: torch.Tensor
    pad_mask: torch.Tensor
    subj_mask: torch.Tensor
    obj_mask: torch.Tensor
    context_mask: torch.Tensor

    def __len__(self) -> int:
        return len(self.instances)

    def repeat(self, row: int, count: int) -> 'Batch':
        def take(t: torch.Tensor) -> torch.Tensor:
            return t[row:row + 1].expand(count, -1)
        return Batch([self.instances[row]] * count, take(self.ids), take(self.pad_mask),
                     take(self.subj_mask), take(self.obj_mask), take(self.context_mask))


@dataclass
class LossComponents:
    total: torch.Tensor
    nrc: torch.Tensor
    ec: torch.Tensor
    rc: torch.Tensor

    def as_floats(self) -> dict:
        return {'loss': self.total.item(), 'loss_nrc': self.nrc.item(),
                'loss_ec': self.ec.item(), 'loss_rc': self.rc.item()}


def make_batch(instances: Sequence[RelationInstance], vocab: Vocabulary, max_seq_len: int) -> Batch:
    """
    Функция собирает батч из маскированных последовательностей. Позиция p соответствует токену p - 1.

    :param instances: Экземпляры отношений.
    :param vocab: Словарь токенов.
    :param max_seq_len: Максимальная длина маскированной последовательности.
    :return: Batch
    """
    sequences = [mask_entities(instance, vocab) for instance in instances]
    length = max((len(s) for s in sequences), default=1)
    if length > max_seq_len:
        longest = max(zip(sequences, instances), key=lambda pair: len(pair[0]))[1]
        raise SequenceTooLongError(f'instance {longest.id}: masked length {length} exceeds max_seq_len={max_seq_len}')
    size = len(instances)
    ids = torch.full((size, length), PAD_ID, dtype=torch.long)
    pad_mask = torch.zeros(size, length, dtype=torch.bool)
    subj_mask = torch.zeros_like(pad_mask)
    obj_mask = torch.zeros_like(pad_mask)
    context_mask = torch.zeros_like(pad_mask)
    for row, (instance, sequence) in enumerate(zip(instances, sequences)):
        ids[row, :len(sequence)] = torch.tensor(sequence.ids, dtype=torch.long)
        pad_mask[row, :len(sequence)] = True
        subj_mask[row, [i + 1 for i in instance.subj_indices]] = True
        obj_mask[row, [i + 1 for i in instance.obj_indices]] = True
        context = [i + 1 for i in instance.context_indices()]
        if context:
            context_mask[row, context] = True
    return Batch(list(instances), ids, pad_mask, subj_mask, obj_mask, context_mask)


def explanation_tensor(labels: Sequence[Optional[ExplanationLabels]], batch: Batch) -> torch.Tensor:
    mask = torch.zeros_like(batch.context_mask)
    for row, label in enumerate(labels):
        if label is not None:
            bits = torch.tensor(label.bits, dtype=torch.bool)
            mask[row, :len(bits)] = bits
    return mask & batch.context_mask


def joint_loss(nrc_prob: torch.Tensor, nrc_target: torch.Tensor, ec_probs: torch.Tensor, ec_targets: torch.Tensor,
               ec_mask: torch.Tensor, rc_probs: torch.Tensor, rc_target: torch.Tensor, rc_active: torch.Tensor,
               nrc_active: Optional[torch.Tensor] = None) -> LossComponents:
    """
    Функция считает совместную функцию потерь loss = loss_nrc + loss_ec + loss_rc.

    Слагаемое EC для экземпляра усредняется по позициям ec_mask, слагаемые суммируются по батчу
    и делятся на его размер. Экземпляры без позиций в ec_mask и с rc_active = False в EC и RC не участвуют.

    :param nrc_prob: Вероятности NRC [B].
    :param nrc_target: Цели NRC (1, если отношение есть) [B].
    :param ec_probs: Вероятности EC [B, T].
    :param ec_targets: Цели EC [B, T].
    :param ec_mask: Позиции, участвующие в EC [B, T].
    :param rc_probs: Распределения RC [B, C].
    :param rc_target: Индексы золотых меток RC [B].
    :param rc_active: Участвует ли экземпляр в RC [B].
    :param nrc_active: Участвует ли экземпляр в NRC [B], по умолчанию все.
    :return: LossComponents
    """
    size = nrc_prob.shape[0]
    dtype = nrc_prob.dtype
    if nrc_active is None:
        nrc_active = torch.ones(size, dtype=torch.bool)
    nrc_terms = F.binary_cross_entropy(nrc_prob, nrc_target.to(dtype), reduction='none')
    nrc = (nrc_terms * nrc_active.to(dtype)).sum() / size

    weights = ec_mask.to(dtype)
    ec_terms = F.binary_cross_entropy(ec_probs, ec_targets.to(dtype), reduction='none') * weights
    counts = weights.sum(dim=1)
    ec = (ec_terms.sum(dim=1) / counts.clamp_min(1.0)).sum() / size

    if rc_probs.numel():
        picked = rc_probs.gather(1, rc_target.unsqueeze(1)).squeeze(1)
        rc_terms = -torch.log(picked.clamp_min(torch.finfo(dtype).tiny))
        rc = (rc_terms * rc_active.to(dtype)).sum() / size
    else:
        rc = torch.zeros((), dtype=dtype)
    return LossComponents(nrc + ec + rc, nrc, ec, rc)


def backward_and_step(network: RelationNetwork, optimizer: torch.optim.Optimizer, scheduler, loss: LossComponents,
                      batch_index: int, max_grad_norm: float) -> dict:
    """
    Функция выполняет обратный проход и шаг оптимизатора AdamW.

    :return: Значения компонент функции потерь.
    """
    if not torch.isfinite(loss.total):
        raise TrainingError(batch_index, f'non-finite loss {loss.total.item()}')
    optimizer.zero_grad(set_to_none=True)
    loss.total.backward()
    for name, parameter in network.named_parameters():
        if parameter.grad is not None and not torch.isfinite(parameter.grad).all():
            raise TrainingError(batch_index, f'non-finite gradient in {name}')
    if max_grad_norm > 0:
        torch.nn.utils.clip_grad_norm_(network.parameters(), max_grad_norm)
    optimizer.step()
    if scheduler is not None:
        scheduler.step()
    return loss.as_floats()


class RelationModel:
    """
    Класс объединяет сеть, словари и настройки вывода обученной модели.
    """

    def __init__(self, network: RelationNetwork, token_vocab: Vocabulary, relation_vocab: tuple,
                 config: ModelConfig, ablate: Optional[str] = None, nrc_threshold: float = 0.5):
        self.network = network
        self.token_vocab = token_vocab
        self.relation_vocab = tuple(relation_vocab)
        self.config = config
        self.ablate = ablate
        self.nrc_threshold = nrc_threshold

    @classmethod
    def create(cls, config: ModelConfig, token_vocab: Vocabulary, relation_vocab: tuple,
               ablate: Optional[str] = None, nrc_threshold: float = 0.5) -> 'RelationModel':
        torch.manual_seed(config.seed)
        classes = len(relation_vocab) + (1 if ablate == ABLATE_NRC else 0)
        network = RelationNetwork(config, len(token_vocab), max(classes, 1))
        return cls(network, token_vocab, relation_vocab, config, ablate, nrc_threshold)

    @property
    def classes(self) -> tuple:
        if self.ablate == ABLATE_NRC:
            return self.relation_vocab + (NO_RELATION,)
        return self.relation_vocab

    def class_index(self, label: str) -> int:
        if label not in self.classes:
            raise UnknownLabelError(label, self.classes)
        return self.classes.index(label)

    def batch(self, instances: Sequence[RelationInstance]) -> Batch:
        return make_batch(instances, self.token_vocab, self.config.max_seq_len)

    def encode(self, batch: Batch, mode: str = 'infer') -> EncoderOutput:
        self.network.train(mode == 'train')
        return self.network.encode(batch.ids, batch.pad_mask)

    def ec_scores(self, batch: Batch, hidden: torch.Tensor) -> torch.Tensor:
        return self.network.ec_scores(hidden, batch.context_mask)

    def rc_distribution(self, batch: Batch, explanation_mask: torch.Tensor,
                        embeddings: Optional[torch.Tensor] = None) -> torch.Tensor:
        if self.ablate == ABLATE_EC:
            explanation_mask = batch.context_mask
        return self.network.rc_distribution(batch.ids, explanation_mask & batch.context_mask,
                                            batch.subj_mask, batch.obj_mask, embeddings)

    def full_context_distribution(self, batch: Batch, embeddings: Optional[torch.Tensor] = None) -> torch.Tensor:
        return self.network.rc_distribution(batch.ids, batch.context_mask, batch.subj_mask, batch.obj_mask,
                                            embeddings)

    @torch.no_grad()
    def predicted_explanations(self, batch: Batch) -> torch.Tensor:
        self.network.eval()
        hidden = self.network.encode(batch.ids, batch.pad_mask).hidden
        return self.ec_scores(batch, hidden) > EC_THRESHOLD

    @torch.no_grad()
    def predict(self, instances: Sequence[RelationInstance]) -> list:
        """
        Метод предсказывает метку отношения и обоснование для каждого экземпляра.
        Если NRC < порога, предсказывается NO_RELATION с пустым обоснованием; иначе RC
        получает токены с EC > 0.5.

        :param instances: Экземпляры.
        :return: Список Prediction в том же порядке.
        """
        predictions = []
        self.network.eval()
        for start in range(0, len(instances), self.config.batch_size):
            chunk = list(instances[start:start + self.config.batch_size])
            if not chunk:
                continue
            batch = self.batch(chunk)
            hidden = self.network.encode(batch.ids, batch.pad_mask).hidden
            nrc = self.network.nrc_score(hidden)
            explanation = self.ec_scores(batch, hidden) > EC_THRESHOLD
            if self.ablate == ABLATE_EC:
                explanation = torch.zeros_like(explanation)
            probs = self.rc_distribution(batch, explanation)
            for row, instance in enumerate(chunk):
                rationale = tuple(int(p) - 1 for p in torch.nonzero(explanation[row]).flatten())
                if self.ablate != ABLATE_NRC and float(nrc[row]) < self.nrc_threshold:
                    label, rationale = NO_RELATION, ()
                elif probs.shape[1] == 0 or not self.classes:
                    label, rationale = NO_RELATION, ()
                else:
                    label = self.classes[int(torch.argmax(probs[row]))]
                    if label == NO_RELATION:
                        rationale = ()
                nrc_score = None if self.ablate == ABLATE_NRC else float(nrc[row])
                predictions.append(Prediction(instance.id, label, rationale, nrc_score))
        return predictions


class NeuralService:
    """
    Класс описывает сервисы для сохранения и загрузки обученных моделей.
    """

    def __init__(self, dao: CheckpointDAO):
        """
        Метод инициализирует DAO
        :param dao: DAO объект
        """
        self.dao = dao

    def save(self, path: Path, model: RelationModel) -> None:
        """
        Метод записывает контрольную точку модели.
        :param path: Путь к файлу.
        :param model: Модель.
        """
        header = {
            'version': VERSION,
            'model': model.config.to_dict(),
            'token_vocab': list(model.token_vocab.symbols),
            'relation_vocab': list(model.relation_vocab),
            'ablate': model.ablate,
            'nrc_threshold': model.nrc_threshold,
        }
        tensors = [(name, tensor.detach().cpu().float().numpy()) for name, tensor in model.network.state_dict().items()]
        self.dao.save(path, header, tensors)
        logger.info('saved checkpoint %s (%d tensors)', path, len(tensors))

    def load(self, path: Path) -> RelationModel:
        """
        Метод читает контрольную точку и проверяет имена и формы тензоров.
        :param path: Путь к файлу.
        :return: RelationModel в режиме вывода.
        """
        header, tensors = self.dao.load(path)
        try:
            config = ModelConfig(**header['model'])
            model = RelationModel.create(config, Vocabulary(tuple(header['token_vocab'])),
                                         tuple(header['relation_vocab']), header.get('ablate'),
                                         header.get('nrc_threshold', 0.5))
        except (KeyError, TypeError) as e:
            raise CheckpointError(f'checkpoint header is incomplete: {e}') from e
        expected = model.network.state_dict()
        names = [name for name, _ in tensors]
        if names != list(expected):
            raise CheckpointError(f'parameter names differ from the model declaration: {names[:3]}...')
        state = {}
        for name, array in tensors:
            if tuple(array.shape) != tuple(expected[name].shape):
                raise CheckpointError(f'shape mismatch for {name}: {array.shape} vs {tuple(expected[name].shape)}')
            state[name] = torch.from_numpy(np.ascontiguousarray(array))
        model.network.load_state_dict(state)
        model.network.eval()
        return model
