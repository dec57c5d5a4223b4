import logging
import math
from collections import defaultdict
from typing import Optional, Sequence

import torch
from torch.optim.lr_scheduler import LambdaLR

from dao.model.config import ABLATE_EC, ABLATE_NRC, TrainConfig
from dao.model.instance import LATENT, PREDICTED, Corpus, ExplanationLabels, RelationInstance
from dao.model.report import BURN_IN, SSL, TrainLogRecord
from service.evaluation import rc_micro
from service.neural import Batch, RelationModel, backward_and_step, explanation_tensor, joint_loss

logger = logging.getLogger(__name__)


def generate_candidates(scores: Sequence[float], t_low: float, t_up: float, cap: int) -> list:
    """
    Функция порождает кандидатов разметки важности по оценкам EC.

    Токен с оценкой выше t_up получает 1, ниже t_low получает 0, остальные перебираются в обоих значениях.
    Перебор идет двоичным счетом: младший бит соответствует первому неоднозначному токену.
    Если кандидатов больше cap, самые уверенные неоднозначные токены заранее фиксируются к ближайшей стороне.

    :param scores: Оценки EC только для позиций контекста.
    :param t_low: Нижний порог.
    :param t_up: Верхний порог.
    :param cap: Максимальное число кандидатов.
    :return: Список кортежей из 0 и 1, выровненных по scores.
    """
    forced = [1 if s > t_up else 0 if s < t_low else None for s in scores]
    ambiguous = [i for i, bit in enumerate(forced) if bit is None]
    limit = cap.bit_length() - 1
    if len(ambiguous) > limit:
        confident = sorted(ambiguous, key=lambda i: (-abs(scores[i] - 0.5), i))[:len(ambiguous) - limit]
        for i in confident:
            forced[i] = 1 if scores[i] > 0.5 else 0
        ambiguous = [i for i in ambiguous if forced[i] is None]
        logger.debug('candidate cap %d: pre-resolved %d ambiguous tokens', cap, len(confident))
    candidates = []
    for m in range(2 ** len(ambiguous)):
        bits = list(forced)
        for j, i in enumerate(ambiguous):
            bits[i] = (m >> j) & 1
        candidates.append(tuple(bits))
    return candidates


def expand_candidate(bits: Sequence[int], instance: RelationInstance, source: str = LATENT) -> ExplanationLabels:
    context = instance.context_indices()
    return ExplanationLabels.from_indices([i for i, bit in zip(context, bits) if bit], len(instance), source)


@torch.no_grad()
def candidate_probabilities(model: RelationModel, instance: RelationInstance, candidates: Sequence[ExplanationLabels],
                            label: str, batch: Optional[Batch] = None) -> list:
    """
    Функция оценивает p(label | кандидат) для всех кандидатов одним батчем.
    """
    model.network.eval()
    batch = batch or model.batch([instance])
    repeated = batch.repeat(0, len(candidates))
    probs = model.rc_distribution(repeated, explanation_tensor(candidates, repeated))
    return probs[:, model.class_index(label)].tolist()


def select_candidate(model: RelationModel, instance: RelationInstance, candidates: Sequence[ExplanationLabels],
                     label: str) -> ExplanationLabels:
    """
    Функция выбирает кандидата с наибольшей вероятностью золотой метки; при равенстве побеждает первый.

    :param model: Модель.
    :param instance: Экземпляр отношения.
    :param candidates: Кандидаты разметки важности.
    :param label: Золотая метка (не NO_RELATION).
    :return: Выбранная разметка с источником LATENT.
    """
    if len(candidates) == 1:
        best = 0
    else:
        probs = candidate_probabilities(model, instance, candidates, label)
        best = max(range(len(candidates)), key=lambda c: (probs[c], -c))
    return ExplanationLabels(candidates[best].bits, LATENT)


def linear_schedule(total_steps: int, warmup_fraction: float):
    warmup = max(1, round(warmup_fraction * total_steps))

    def factor(step: int) -> float:
        if step < warmup:
            return (step + 1) / warmup
        return max(0.0, (total_steps - step) / max(1, total_steps - warmup))

    return factor


class TrainerService:
    """
    Класс описывает полуконтролируемое обучение: период burn-in на экземплярах, размеченных правилами,
    затем поиск латентных объяснений для остальных положительных экземпляров.
    """

    def __init__(self, config: TrainConfig = TrainConfig()):
        """
        Метод инициализирует настройки по умолчанию для поиска латентных объяснений.
        :param config: Конфигурация обучения.
        """
        self.config = config

    @torch.no_grad()
    def _ec_context_scores(self, model: RelationModel, instances: Sequence[RelationInstance]) -> list:
        """
        Метод возвращает оценки EC только для позиций контекста каждого экземпляра.
        """
        model.network.eval()
        batch = model.batch(instances)
        hidden = model.network.encode(batch.ids, batch.pad_mask).hidden
        scores = model.ec_scores(batch, hidden)
        return [[float(scores[row, i + 1]) for i in instance.context_indices()]
                for row, instance in enumerate(instances)]

    def latent_rationale(self, model: RelationModel, instance: RelationInstance, label: str,
                         config: Optional[TrainConfig] = None) -> ExplanationLabels:
        """
        Метод находит латентное объяснение экземпляра: оценки EC, кандидаты, выбор по RC.
        """
        labels, _ = self._search(model, [instance], [label], config or self.config)
        return labels[0]

    def _search(self, model: RelationModel, instances: list, labels: list, config: TrainConfig) -> tuple:
        """
        Метод ищет латентные объяснения батчами.

        :param model: Модель.
        :param instances: Положительные экземпляры без разметки правилами.
        :param labels: Золотые метки, выровненные по instances.
        :param config: Пороги и ограничение числа кандидатов.
        :return: Пара (список ExplanationLabels, число кандидатов по экземплярам).
        """
        found, counts = [], []
        for start in range(0, len(instances), model.config.batch_size):
            chunk = instances[start:start + model.config.batch_size]
            for instance, label, scores in zip(chunk, labels[start:start + len(chunk)],
                                               self._ec_context_scores(model, chunk)):
                bits = generate_candidates(scores, config.t_low, config.t_up, config.candidate_cap)
                candidates = [expand_candidate(b, instance) for b in bits]
                found.append(select_candidate(model, instance, candidates, label))
                counts.append(len(candidates))
        return found, counts

    @torch.no_grad()
    def _predicted_negative_labels(self, model: RelationModel, instances: list) -> dict:
        """
        Без головы NRC отрицательные примеры получают объяснения, предсказанные головой EC.
        """
        labels = {}
        for start in range(0, len(instances), model.config.batch_size):
            chunk = instances[start:start + model.config.batch_size]
            mask = model.predicted_explanations(model.batch(chunk))
            for row, instance in enumerate(chunk):
                indices = [int(p) - 1 for p in torch.nonzero(mask[row]).flatten()]
                labels[instance.id] = ExplanationLabels.from_indices(indices, len(instance), PREDICTED)
        return labels

    def _latent_labels(self, model: RelationModel, instances: list, annotations: dict, config: TrainConfig) -> tuple:
        """
        Метод собирает латентные объяснения на эпоху. Экземпляры, размеченные правилами, не пересчитываются.
        """
        latent, counts = {}, []
        if model.ablate != ABLATE_EC:
            pending = [i for i in instances if i.is_positive and i.id not in annotations]
            found, counts = self._search(model, pending, [i.gold_relation for i in pending], config)
            latent = {instance.id: labels for instance, labels in zip(pending, found)}
        if model.ablate == ABLATE_NRC:
            latent.update(self._predicted_negative_labels(model, [i for i in instances if not i.is_positive]))
        return latent, counts

    def _batch_loss(self, model: RelationModel, chunk: list, annotations: dict, latent: dict, burn_in: bool):
        """
        Метод считает совместную функцию потерь батча.

        Разметка правилами имеет приоритет над латентной; в период burn-in латентная разметка не используется.

        :param model: Модель.
        :param chunk: Экземпляры батча.
        :param annotations: Разметка правилами.
        :param latent: Латентная разметка текущей эпохи.
        :param burn_in: Идет ли период burn-in.
        :return: LossComponents
        """
        batch = model.batch(chunk)
        output = model.encode(batch, mode='train')
        nrc_prob = model.network.nrc_score(output.hidden)
        ec_probs = model.network.ec_scores(output.hidden)
        labels, ec_active, rc_active, targets = [], [], [], []
        for instance in chunk:
            label = annotations.get(instance.id) if instance.is_positive else None
            if label is None and not burn_in:
                label = latent.get(instance.id)
            if instance.is_positive:
                ec_active.append(label is not None and model.ablate != ABLATE_EC)
                rc_active.append(label is not None or (model.ablate == ABLATE_EC and not burn_in))
            else:
                ec_active.append(False)
                rc_active.append(model.ablate == ABLATE_NRC and not burn_in)
            labels.append(label)
            targets.append(model.class_index(instance.gold_relation) if rc_active[-1] else 0)
        explanation = explanation_tensor(labels, batch)
        rc_active = torch.tensor(rc_active, dtype=torch.bool)
        if rc_active.any():
            rc_probs = model.rc_distribution(batch, explanation)
        else:
            rc_probs = torch.zeros(len(chunk), 0)
        ec_mask = batch.context_mask & torch.tensor(ec_active, dtype=torch.bool)[:, None]
        nrc_active = torch.full((len(chunk),), model.ablate != ABLATE_NRC, dtype=torch.bool)
        nrc_target = torch.tensor([instance.is_positive for instance in chunk], dtype=nrc_prob.dtype)
        return joint_loss(nrc_prob, nrc_target, ec_probs, explanation, ec_mask, rc_probs,
                          torch.tensor(targets, dtype=torch.long), rc_active, nrc_active)

    def evaluate(self, model: RelationModel, instances: Sequence[RelationInstance]) -> float:
        if not instances:
            return 0.0
        predictions = {p.id: p.label for p in model.predict(instances)}
        return rc_micro(predictions, {i.id: i.gold_relation for i in instances}).f1

    def train(self, corpus: Corpus, annotations: dict, config: TrainConfig, ablate: Optional[str] = None) -> tuple:
        """
        Метод обучает модель по схеме burn-in + полуконтролируемое обучение.

        :param corpus: Корпус.
        :param annotations: Разметка важности от правил (id -> ExplanationLabels).
        :param config: Конфигурация обучения.
        :param ablate: None, 'nrc' или 'ec' для отключения головы.
        :return: Пара (RelationModel, список TrainLogRecord).
        """
        model = RelationModel.create(config.model, corpus.token_vocab, corpus.relation_vocab, ablate,
                                     config.nrc_threshold)
        network = model.network
        instances = list(corpus.train)
        if not annotations:
            logger.warning('no rule annotations: burn-in trains the NRC head only')
        batch_size = config.model.batch_size
        steps_per_epoch = math.ceil(len(instances) / batch_size)
        total_steps = max(1, steps_per_epoch * config.total_epochs)
        optimizer = torch.optim.AdamW(network.parameters(), lr=config.model.lr,
                                      weight_decay=config.model.weight_decay)
        scheduler = LambdaLR(optimizer, linear_schedule(total_steps, config.model.warmup_fraction))
        generator = torch.Generator().manual_seed(config.model.seed)
        records, step = [], 0
        for epoch in range(config.total_epochs):
            burn_in = epoch < config.burn_in_epochs
            latent, counts = ({}, []) if burn_in else self._latent_labels(model, instances, annotations, config)
            order = torch.randperm(len(instances), generator=generator).tolist()
            sums = defaultdict(float)
            for start in range(0, len(instances), batch_size):
                chunk = [instances[i] for i in order[start:start + batch_size]]
                loss = self._batch_loss(model, chunk, annotations, latent, burn_in)
                stats = backward_and_step(network, optimizer, scheduler, loss, step, config.model.max_grad_norm)
                logger.debug('epoch %d batch %d loss %.4f', epoch + 1, step, stats['loss'])
                for key, value in stats.items():
                    sums[key] += value
                step += 1
            means = {key: sums[key] / max(1, steps_per_epoch) for key in ('loss', 'loss_nrc', 'loss_ec', 'loss_rc')}
            record = TrainLogRecord(
                epoch=epoch + 1,
                phase=BURN_IN if burn_in else SSL,
                dev_f1=self.evaluate(model, corpus.dev),
                mean_candidates=None if burn_in or not counts else sum(counts) / len(counts),
                **means,
            )
            records.append(record)
            logger.info('epoch %d (%s): loss=%.4f dev_f1=%.4f candidates=%s', record.epoch, record.phase,
                        record.loss, record.dev_f1, record.mean_candidates)
        network.eval()
        return model, records
