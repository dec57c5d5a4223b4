import logging
from typing import Callable, Iterable, Mapping, Optional, Sequence

import torch

from constants import NO_RELATION, UNK_ID
from dao.model.instance import RelationInstance
from dao.model.prediction import OURS, Prediction
from exceptions import ConfigError
from service.neural import RelationModel

logger = logging.getLogger(__name__)

ATTENTION = 'attention'
SALIENCY = 'saliency'
OCCLUSION = 'occlusion'
GREEDY = 'greedy'
ALL_BETWEEN = 'all-between'
METHODS = (OURS, ATTENTION, SALIENCY, OCCLUSION, GREEDY, ALL_BETWEEN)
PARAMETRIC = (ATTENTION, SALIENCY, OCCLUSION)


def all_between(instance: RelationInstance) -> frozenset:
    left, right = sorted((instance.subj_span, instance.obj_span))
    return frozenset(range(left[1] + 1, right[0]))


def top_n(scores: Mapping[int, float], n: int) -> frozenset:
    """
    Функция выбирает n индексов с наибольшей оценкой; при равенстве выигрывает меньший индекс.
    """
    ranked = sorted(scores, key=lambda i: (-scores[i], i))
    return frozenset(ranked[:n])


def greedy_rationale(candidates: Iterable[int], score_fn: Callable[[list], list]) -> frozenset:
    """
    Функция жадно добавляет токен, сильнее всего увеличивающий оценку, пока оценка растет.

    :param candidates: Индексы-кандидаты.
    :param score_fn: Функция, оценивающая список множеств индексов.
    :return: Выбранное множество.
    """
    current = frozenset()
    current_score = score_fn([current])[0]
    pool = sorted(set(candidates))
    while True:
        remaining = [c for c in pool if c not in current]
        if not remaining:
            return current
        scores = score_fn([current | {c} for c in remaining])
        best = max(range(len(remaining)), key=lambda k: (scores[k], -remaining[k]))
        if scores[best] <= current_score:
            return current
        current, current_score = current | {remaining[best]}, scores[best]


class AttributionService:
    """
    Класс описывает базовые методы объяснения решений модели.
    Все методы объясняют решение RC, видящего весь контекст, и целевым считают его самый вероятный класс.
    """

    @staticmethod
    def _target(model: RelationModel, batch) -> int:
        """
        Метод возвращает индекс класса, предсказанного по полному контексту.
        """
        with torch.no_grad():
            return int(torch.argmax(model.full_context_distribution(batch)[0]))

    def cls_attention(self, model: RelationModel, instance: RelationInstance) -> dict:
        """
        Метод возвращает веса внимания [CLS] последнего слоя, усредненные по головам.
        :return: Словарь индекс токена -> вес.
        """
        batch = model.batch([instance])
        with torch.no_grad():
            output = model.encode(batch)
        if not output.attentions:
            return {i: 0.0 for i in instance.context_indices()}
        row = output.attentions[-1][0, :, 0, :].mean(dim=0)
        return {i: float(row[i + 1]) for i in instance.context_indices()}

    def embedding_gradients(self, model: RelationModel, instance: RelationInstance,
                            label: Optional[str] = None) -> dict:
        """
        Метод считает сумму модулей градиента вероятности класса по эмбеддингу каждого токена.
        :return: Словарь индекс токена -> оценка.
        """
        network = model.network
        network.eval()
        batch = model.batch([instance])
        target = model.class_index(label) if label else self._target(model, batch)
        embeddings = network.embed(batch.ids).detach().requires_grad_(True)
        probs = model.full_context_distribution(batch, embeddings)
        probs[0, target].backward()
        saliency = embeddings.grad[0].abs().sum(dim=-1)
        network.zero_grad(set_to_none=True)
        return {i: float(saliency[i + 1]) for i in instance.context_indices()}

    @torch.no_grad()
    def occlusion_scores(self, model: RelationModel, instance: RelationInstance) -> dict:
        """
        Метод заменяет каждый токен контекста на [UNK] и измеряет падение вероятности целевого класса.
        :return: Словарь индекс токена -> падение вероятности.
        """
        model.network.eval()
        batch = model.batch([instance])
        context = instance.context_indices()
        if not context:
            return {}
        probs = model.full_context_distribution(batch)
        target = int(torch.argmax(probs[0]))
        repeated = batch.repeat(0, len(context))
        ids = batch.ids.repeat(len(context), 1)
        for row, i in enumerate(context):
            ids[row, i + 1] = UNK_ID
        occluded = model.network.rc_distribution(ids, repeated.context_mask, repeated.subj_mask, repeated.obj_mask)
        base = float(probs[0, target])
        return {i: base - float(occluded[row, target]) for row, i in enumerate(context)}

    def greedy(self, model: RelationModel, instance: RelationInstance) -> frozenset:
        model.network.eval()
        batch = model.batch([instance])
        target = self._target(model, batch)

        @torch.no_grad()
        def score(sets: Sequence[frozenset]) -> list:
            repeated = batch.repeat(0, len(sets))
            mask = torch.zeros_like(repeated.context_mask)
            for row, chosen in enumerate(sets):
                for i in chosen:
                    mask[row, i + 1] = True
            probs = model.network.rc_distribution(repeated.ids, mask & repeated.context_mask,
                                                  repeated.subj_mask, repeated.obj_mask)
            return probs[:, target].tolist()

        return greedy_rationale(instance.context_indices(), score)

    def attribute(self, method: str, model: Optional[RelationModel], instance: RelationInstance,
                  n: int = 0) -> frozenset:
        """
        Метод возвращает множество важных токенов выбранным методом.

        :param method: ours, attention, saliency, occlusion, greedy или all-between.
        :param model: Обученная модель (не нужна для all-between).
        :param instance: Экземпляр отношения.
        :param n: Число токенов для параметрических методов.
        :return: Множество индексов токенов без токенов сущностей.
        """
        if method not in METHODS:
            raise ConfigError(f'unknown attribution method {method!r}')
        if method == ALL_BETWEEN:
            return all_between(instance)
        if model is None:
            raise ConfigError(f'method {method} needs a trained model')
        if method == OURS:
            return frozenset(model.predict([instance])[0].rationale)
        if method == GREEDY:
            return self.greedy(model, instance)
        if n <= 0:
            raise ConfigError(f'method {method} needs a positive top-N, got {n}')
        if method == ATTENTION:
            scores = self.cls_attention(model, instance)
        elif method == SALIENCY:
            scores = self.embedding_gradients(model, instance)
        else:
            scores = self.occlusion_scores(model, instance)
        return top_n(scores, n)

    def target_label(self, model: RelationModel, instance: RelationInstance) -> str:
        if not model.classes:
            return NO_RELATION
        return model.classes[self._target(model, model.batch([instance]))]

    def explain(self, method: str, model: Optional[RelationModel], instances: Sequence[RelationInstance],
                sizes: Optional[Mapping[str, int]] = None, n: int = 0) -> list:
        """
        Метод строит записи-обоснования для набора экземпляров.

        :param method: Метод объяснения.
        :param model: Обученная модель или None для all-between.
        :param instances: Экземпляры.
        :param sizes: Словарь id -> число токенов; для остальных экземпляров используется n.
        :param n: Число токенов по умолчанию.
        :return: Список Prediction с полем method.
        """
        instances = list(instances)
        if method == OURS and model is not None:
            return model.predict(instances)
        sizes = sizes or {}
        predictions = []
        for instance in instances:
            rationale = self.attribute(method, model, instance, sizes.get(instance.id) or n)
            label = self.target_label(model, instance) if model is not None else NO_RELATION
            predictions.append(Prediction(instance.id, label, tuple(sorted(rationale)), None, method))
        logger.info('%s: explained %d instances', method, len(predictions))
        return predictions
