import logging
from functools import lru_cache
from pathlib import Path
from typing import Iterable

import networkx as nx

from constants import CLS_ID, NO_RELATION, OBJ_PREFIX, ROOT, SPLITS, SUBJ_PREFIX, UP, DOWN
from dao.corpus import CorpusDAO
from dao.model.instance import Corpus, MaskedSequence, PathStep, RelationInstance, Vocabulary
from exceptions import CorpusValidationError

logger = logging.getLogger(__name__)


def subj_symbol(entity_type: str) -> str:
    return SUBJ_PREFIX + entity_type


def obj_symbol(entity_type: str) -> str:
    return OBJ_PREFIX + entity_type


def mask_entities(instance: RelationInstance, vocab: Vocabulary) -> MaskedSequence:
    """
    Функция заменяет каждый токен субъекта на SUBJ-<тип>, каждый токен объекта на OBJ-<тип>
    и добавляет [CLS] в начало последовательности.

    :param instance: Экземпляр отношения.
    :param vocab: Словарь токенов.
    :return: MaskedSequence длины 1 + len(instance).
    """
    subj_id = vocab.index(subj_symbol(instance.subj_type))
    obj_id = vocab.index(obj_symbol(instance.obj_type))
    subj, obj = set(instance.subj_indices), set(instance.obj_indices)
    ids = [CLS_ID]
    for i, token in enumerate(instance.tokens):
        if i in subj:
            ids.append(subj_id)
        elif i in obj:
            ids.append(obj_id)
        else:
            ids.append(vocab.index(token.form))
    return MaskedSequence(tuple(ids), (None,) + tuple(range(len(instance))))


def validate_instance(instance: RelationInstance) -> None:
    """
    Функция проверяет границы сущностей и корректность дерева зависимостей.

    :param instance: Экземпляр отношения.
    :return: None, либо исключение CorpusValidationError.
    """
    n = len(instance)
    if n == 0:
        raise CorpusValidationError(instance.id, 'sentence has no tokens')
    for name, (start, end) in (('subject', instance.subj_span), ('object', instance.obj_span)):
        if not 0 <= start <= end < n:
            raise CorpusValidationError(instance.id, f'{name} span [{start}, {end}] out of bounds')
    if set(instance.subj_indices) & set(instance.obj_indices):
        raise CorpusValidationError(instance.id, 'subject and object spans overlap')
    graph = nx.DiGraph()
    graph.add_nodes_from(range(n))
    roots = []
    for i, token in enumerate(instance.tokens):
        if token.head == ROOT:
            roots.append(i)
        elif not 0 <= token.head < n:
            raise CorpusValidationError(instance.id, f'token {i} has out-of-range head {token.head}')
        elif token.head == i:
            raise CorpusValidationError(instance.id, f'token {i} is its own head')
        else:
            graph.add_edge(i, token.head)
    try:
        cycle = nx.find_cycle(graph)
    except nx.NetworkXNoCycle:
        cycle = None
    if cycle:
        raise CorpusValidationError(instance.id, f'head cycle through tokens {[u for u, _ in cycle]}')
    if len(roots) != 1:
        raise CorpusValidationError(instance.id, f'expected exactly one root, found {len(roots)}')


@lru_cache(maxsize=4096)
def dependency_graph(instance: RelationInstance) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(range(len(instance)))
    graph.add_edges_from((i, token.head) for i, token in enumerate(instance.tokens) if token.head != ROOT)
    return graph


def shortest_dep_path(instance: RelationInstance, source: Iterable[int], target: Iterable[int]) -> tuple:
    """
    Функция находит кратчайший путь в дереве зависимостей между двумя множествами токенов.
    При равной длине выбирается пара концов с наименьшими индексами (source, target).

    :param instance: Экземпляр отношения.
    :param source: Индексы начальных токенов.
    :param target: Индексы конечных токенов.
    :return: Пара (шаги пути, (начало, конец)).
    """
    graph = dependency_graph(instance)
    targets = sorted(set(target))
    best = None
    for a in sorted(set(source)):
        lengths = nx.single_source_shortest_path_length(graph, a)
        for b in targets:
            candidate = (lengths[b], a, b)
            if best is None or candidate < best:
                best = candidate
    _, a, b = best
    nodes = nx.shortest_path(graph, a, b)
    steps = []
    for u, v in zip(nodes, nodes[1:]):
        if instance.tokens[u].head == v:
            steps.append(PathStep(UP, instance.tokens[u].deprel))
        else:
            steps.append(PathStep(DOWN, instance.tokens[v].deprel))
    return tuple(steps), (a, b)


def depth(instance: RelationInstance, index: int) -> int:
    steps = 0
    while instance.tokens[index].head != ROOT:
        index = instance.tokens[index].head
        steps += 1
    return steps


def shallowest(instance: RelationInstance, indices: Iterable[int]) -> int:
    return min(indices, key=lambda i: (depth(instance, i), i))


def build_vocabularies(train, dev=(), test=()) -> tuple:
    """
    Функция строит словарь отношений и словарь токенов.
    Словоформы берутся из обучающей части, символы SUBJ-/OBJ- из всех частей.

    :return: Пара (relation_vocab, token_vocab).
    """
    instances = [*train, *dev, *test]
    relations = sorted({i.gold_relation for i in instances if i.gold_relation != NO_RELATION})
    symbols = {subj_symbol(i.subj_type) for i in instances} | {obj_symbol(i.obj_type) for i in instances}
    for instance in train:
        symbols.update(instance.tokens[j].form for j in instance.context_indices())
    return tuple(relations), Vocabulary(tuple(sorted(symbols)))


class CorpusService:
    """
    Класс описывает сервисы для загрузки, проверки и сохранения корпусов.
    """

    def __init__(self, dao: CorpusDAO):
        """
        Метод инициализирует DAO
        :param dao: DAO объект
        """
        self.dao = dao

    def load_corpus(self, path: Path, fmt: str = 'jsonl') -> Corpus:
        """
        Метод загружает корпус из каталога с файлами train/dev/test или из одного файла.

        :param path: Каталог или файл корпуса.
        :param fmt: Идентификатор формата (jsonl или json).
        :return: Corpus с построенными словарями.
        """
        path = Path(path)
        splits = {name: [] for name in SPLITS}
        if path.is_dir():
            for name in SPLITS:
                split_path = self.dao.split_path(path, name, fmt)
                if split_path.exists():
                    splits[name] = self.dao.load(split_path, fmt)
        else:
            splits['train'] = self.dao.load(path, fmt)
        for instances in splits.values():
            for instance in instances:
                validate_instance(instance)
        corpus = self.build(splits['train'], splits['dev'], splits['test'])
        logger.info('loaded corpus %s: train=%d dev=%d test=%d relations=%d vocab=%d', path,
                    len(corpus.train), len(corpus.dev), len(corpus.test),
                    len(corpus.relation_vocab), len(corpus.token_vocab.symbols))
        return corpus

    @staticmethod
    def build(train, dev=(), test=()) -> Corpus:
        relation_vocab, token_vocab = build_vocabularies(train, dev, test)
        return Corpus(tuple(train), tuple(dev), tuple(test), relation_vocab, token_vocab)

    def save_corpus(self, directory: Path, corpus: Corpus, fmt: str = 'jsonl') -> list:
        """
        Метод записывает части корпуса в каталог.
        :param directory: Каталог назначения.
        :param corpus: Корпус.
        :param fmt: Идентификатор формата.
        :return: Список записанных путей.
        """
        paths = []
        for name in SPLITS:
            split_path = self.dao.split_path(directory, name, fmt)
            self.dao.save(split_path, corpus.split(name), fmt)
            paths.append(split_path)
        return paths
