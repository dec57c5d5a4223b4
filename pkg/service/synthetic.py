import logging
from dataclasses import replace
from typing import Callable, Optional

import numpy as np

from constants import NO_RELATION, ROOT, SPLITS
from dao.model.generator import (
    OBJ_SLOT, OTHER_SLOT, SUBJ_SLOT, TRIG_SLOT, GeneratorSpec, RelationSpec, Trigger,
)
from dao.model.instance import Corpus, ExplanationLabels, RelationInstance, Token
from dao.model.rule import GAP, LEMMA, LITERAL, MANUAL, OBJ, SUBJ, PatternElement, RuleSet, SurfaceRule, TriggerConstraint
from exceptions import ConfigError
from service.corpus import CorpusService, validate_instance
from service.rule_gen import dedupe, generate_rule

logger = logging.getLogger(__name__)

FLAT = 'flat'
MENTION_POS = 'NNP'


def _first(options):
    """
    Выбор по умолчанию для Realizer: первый вариант.
    """
    return options[0]


class Realizer:
    """
    Класс собирает предложение с деревом зависимостей из шаблона, подставляя упоминания,
    триггер и фразы-заполнители.
    """

    def __init__(self, spec: GeneratorSpec, choose: Callable = _first):
        self.spec = spec
        self.choose = choose

    def _mention(self, entity_type: str, used: set) -> list:
        """
        Метод выбирает упоминание сущности, еще не использованное в предложении, если такое есть.
        """
        options = [m for m in self.spec.mentions[entity_type] if m not in used] or list(self.spec.mentions[entity_type])
        mention = self.choose(options)
        used.add(mention)
        words = mention.split()
        return [(w, w.lower(), MENTION_POS, entity_type, None if i == 0 else 0, FLAT) for i, w in enumerate(words)]

    def _phrase(self, item, subj_type: str, obj_type: str, trigger: Trigger, used: set) -> list:
        """
        Метод разворачивает один элемент шаблона в токены: сущность, триггер или постоянное слово.
        """
        if item.slot == SUBJ_SLOT:
            return self._mention(subj_type, used)
        if item.slot == OBJ_SLOT:
            return self._mention(obj_type, used)
        if item.slot == OTHER_SLOT:
            return self._mention(subj_type, used)
        if item.slot == TRIG_SLOT:
            return [(trigger.form, trigger.lemma, item.pos, 'O', None, item.deprel)]
        if item.slot is not None:
            phrase = self.choose(self.spec.fillers[item.slot])
            return [(p.form, p.form.lower(), p.pos, 'O', None if p.head == 0 else p.head - 1, p.deprel)
                    for p in phrase]
        return [(item.form, item.form.lower(), item.pos, 'O', None, item.deprel)]

    def realize(self, instance_id: str, template: tuple, subj_type: str, obj_type: str,
                trigger: Optional[Trigger], gold: str) -> tuple:
        """
        Метод собирает один экземпляр отношения.

        :return: Пара (RelationInstance, индекс токена-триггера или None).
        """
        used = set()
        phrases = []
        # упоминания выбираются в порядке SUBJ, OBJ, остальные
        order = sorted(range(len(template)), key=lambda i: {SUBJ_SLOT: 0, OBJ_SLOT: 1}.get(template[i].slot, 2))
        by_item = {}
        for i in order:
            by_item[i] = self._phrase(template[i], subj_type, obj_type, trigger, used)
        offsets, position = [], 0
        for i in range(len(template)):
            offsets.append(position)
            phrases.append(by_item[i])
            position += len(by_item[i])
        roots = [offsets[i] + next(j for j, t in enumerate(phrase) if t[4] is None)
                 for i, phrase in enumerate(phrases)]
        tokens, subj_span, obj_span, trigger_index = [], None, None, None
        for i, (item, phrase) in enumerate(zip(template, phrases)):
            for form, lemma, pos, ner, local_head, deprel in phrase:
                if local_head is None:
                    head = roots[item.head - 1] if item.head else ROOT
                    deprel = item.deprel
                else:
                    head = offsets[i] + local_head
                tokens.append(Token(form, lemma, pos, ner, head, deprel))
            span = (offsets[i], offsets[i] + len(phrase) - 1)
            if item.slot == SUBJ_SLOT:
                subj_span = span
            elif item.slot == OBJ_SLOT:
                obj_span = span
            elif item.slot == TRIG_SLOT:
                trigger_index = offsets[i]
        instance = RelationInstance(instance_id, tuple(tokens), subj_span, obj_span, subj_type, obj_type, gold)
        validate_instance(instance)
        return instance, trigger_index


class SyntheticService:
    """
    Класс описывает генератор синтетического корпуса и набора ручных правил к нему.
    """

    def __init__(self, corpus_service: CorpusService):
        """
        Метод инициализирует сервис корпусов.
        :param corpus_service: Сервис для построения словарей корпуса.
        """
        self.corpus_service = corpus_service

    def gen_synthetic(self, spec: GeneratorSpec, seed: int) -> Corpus:
        """
        Метод генерирует корпус. Результат детерминирован для пары (spec, seed).

        :param spec: Описание генератора.
        :param seed: Зерно генератора случайных чисел.
        :return: Corpus
        """
        rng = np.random.default_rng(seed)
        realizer = Realizer(spec, lambda options: options[int(rng.integers(len(options)))])
        splits = {name: self._partition(spec, name, getattr(spec, name), rng, realizer) for name in SPLITS}
        corpus = self.corpus_service.build(splits['train'], splits['dev'], splits['test'])
        logger.info('generated synthetic corpus: train=%d dev=%d test=%d relations=%d',
                    len(corpus.train), len(corpus.dev), len(corpus.test), len(corpus.relation_vocab))
        return corpus

    def _partition(self, spec: GeneratorSpec, split: str, size: int, rng, realizer: Realizer) -> list:
        """
        Метод порождает одну часть корпуса с заданной долей отрицательных и трудных отрицательных примеров.

        :param spec: Описание генератора.
        :param split: Имя части (train, dev, test).
        :param size: Число экземпляров.
        :param rng: Генератор случайных чисел.
        :param realizer: Объект, собирающий предложения по шаблонам.
        :return: Список RelationInstance.
        """
        negatives = round(size * spec.negative_fraction)
        positives = size - negatives
        with_hard = [r for r in spec.relations if r.hard_negatives]
        hard = round(negatives * spec.hard_negative_fraction) if with_hard else 0
        if not spec.distractors:
            hard = negatives if with_hard else 0
        distractors = negatives - hard
        if distractors and not spec.distractors:
            raise ConfigError('negative instances requested but no distractor or hard negative templates given')
        covered = set(int(i) for i in rng.permutation(positives)[:round(positives * spec.rule_coverage)])
        drafts = []
        for k in range(positives):
            relation = spec.relations[k % len(spec.relations)]
            template = realizer.choose(relation.templates)
            trigger = realizer.choose(relation.rule_triggers if k in covered else relation.triggers)
            drafts.append((template, relation.subj_type, relation.obj_type, trigger, relation.label))
        for k in range(hard):
            relation = with_hard[k % len(with_hard)]
            template = realizer.choose(relation.hard_negatives)
            trigger = realizer.choose(relation.rule_triggers + relation.triggers)
            drafts.append((template, relation.subj_type, relation.obj_type, trigger, NO_RELATION))
        for _ in range(distractors):
            relation = realizer.choose(spec.relations)
            template = realizer.choose(spec.distractors)
            trigger = realizer.choose(relation.triggers)
            drafts.append((template, relation.subj_type, relation.obj_type, trigger, NO_RELATION))
        order = rng.permutation(len(drafts))
        instances = []
        for position, index in enumerate(order):
            template, subj_type, obj_type, trigger, gold = drafts[int(index)]
            instance, _ = realizer.realize(f'{split}-{position:05d}', template, subj_type, obj_type, trigger, gold)
            instances.append(instance)
        logger.debug('%s: %d positives (%d rule-covered), %d hard negatives, %d distractors',
                     split, positives, len(covered), hard, distractors)
        return instances

    def manual_rules(self, spec: GeneratorSpec) -> RuleSet:
        """
        Метод строит ручной набор правил, покрывающий экземпляры с «видимыми» триггерами:
        одно синтаксическое правило на пару (отношение, шаблон) и одно поверхностное правило на отношение.

        :param spec: Описание генератора.
        :return: RuleSet с происхождением MANUAL.
        """
        realizer = Realizer(spec)
        rules = []
        for relation in spec.relations:
            lemmas = tuple(dict.fromkeys((t.lemma,) for t in relation.rule_triggers))
            for template in relation.templates:
                prototype, trigger_index = realizer.realize(
                    'prototype', template, relation.subj_type, relation.obj_type,
                    relation.rule_triggers[0], relation.label)
                rationale = ExplanationLabels.from_indices([trigger_index], len(prototype))
                rule = generate_rule(prototype, relation.label, rationale, RuleSet(), skip_if_manual_match=False,
                                     provenance=MANUAL)
                if rule is None:
                    raise ConfigError(f'relation {relation.label}: trigger cannot anchor a rule')
                rules.append(replace(rule, trigger=TriggerConstraint(LEMMA, lemmas)))
            surface = self._surface_rule(relation)
            if surface is not None:
                rules.append(surface)
        rules = [replace(rule, id=f'manual-{n:05d}') for n, rule in enumerate(dedupe(rules), start=1)]
        return RuleSet(tuple(rules))

    @staticmethod
    def _surface_rule(relation: RelationSpec) -> Optional[SurfaceRule]:
        """
        Метод строит поверхностное правило по первому шаблону отношения.
        Возвращает None, если триггер не лежит между сущностями.
        """
        template = relation.templates[0]
        slots = [item.slot for item in template]
        start, stop = sorted((slots.index(SUBJ_SLOT), slots.index(OBJ_SLOT)))
        if TRIG_SLOT not in slots[start:stop + 1]:
            return None
        pattern = []
        for item in template[start:stop + 1]:
            if item.slot == SUBJ_SLOT:
                element = PatternElement(SUBJ, relation.subj_type)
            elif item.slot == OBJ_SLOT:
                element = PatternElement(OBJ, relation.obj_type)
            elif item.slot == TRIG_SLOT:
                element = PatternElement(LITERAL, relation.rule_triggers[0].form)
            elif item.slot is not None:
                element = PatternElement(GAP)
            else:
                element = PatternElement(LITERAL, item.form)
            if not (element.kind == GAP and pattern and pattern[-1].kind == GAP):
                pattern.append(element)
        return SurfaceRule('surface', relation.label, tuple(pattern), MANUAL)
