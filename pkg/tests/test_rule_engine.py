import itertools
import random

import pytest

from constants import DOWN, NO_RELATION, UP
from dao.model.instance import RULE, PathStep
from dao.model.rule import (
    GAP, LEMMA, LITERAL, MANUAL, OBJ, SUBJ, WORD, Argument, PatternElement, RuleSet, SurfaceRule, SyntacticRule,
    TriggerConstraint,
)
from dao.rule import RuleDAO, parse_pattern
from exceptions import RuleSyntaxError, RuleValidationError
from service.corpus import CorpusService
from service.rule_engine import (
    RuleEngineService, annotate_explanations, match_rule, predict_with_rules, rule_coverage, validate_ruleset,
)
from service.synthetic import SyntheticService
from tests.factories import born_in, instance, synthetic_spec, visited, walkthrough

CHILDREN_RULE = """\
- id: children-1
  kind: syntactic
  label: per:children
  trigger: word=daughter
  subject: SUBJ_Person = >nmod:poss
  object: OBJ_Person = >appos
"""

BORN_PATTERN = 'SUBJ-PER was born in * OBJ-CITY'


@pytest.fixture
def service():
    return RuleEngineService(dao=RuleDAO())


def load(tmp_path, service, text):
    path = tmp_path / 'rules.yaml'
    path.write_text(text, encoding='utf-8')
    return service.parse_rules(path)


def surface(rule_id, label, pattern=BORN_PATTERN):
    return SurfaceRule(rule_id, label, parse_pattern(pattern, 1))


def children_rule(rule_id='children-1', subj_type='Person'):
    return SyntacticRule(rule_id, 'per:children', TriggerConstraint(WORD, (('daughter',),)),
                         Argument(subj_type, (PathStep(DOWN, 'nmod:poss'),)),
                         Argument('Person', (PathStep(DOWN, 'appos'),)))


def test_parses_syntactic_rule(tmp_path, service):
    rules = load(tmp_path, service, CHILDREN_RULE)
    assert len(rules) == 1
    assert rules.get('children-1') == children_rule()
    assert rules.get('children-1').provenance == MANUAL


def test_accepts_bracketed_regex_trigger(tmp_path, service):
    rules = load(tmp_path, service, CHILDREN_RULE.replace('word=daughter', '"[word=/daughter/]"'))
    assert rules.get('children-1').trigger == TriggerConstraint(WORD, (('daughter',),))


def test_lemma_alternation_and_optional_step(tmp_path, service):
    text = """\
- id: founded
  kind: syntactic
  label: org:founded_by
  trigger: lemma=/found|create|start|establish|launch/
  subject: SUBJ_Person = <acl? nsubj
  object: OBJ_Organization = nmod
"""
    rule = load(tmp_path, service, text).get('founded')
    assert rule.trigger.field == LEMMA
    assert len(rule.trigger.alternatives) == 5
    assert rule.subject.path == (PathStep(UP, 'acl', optional=True), PathStep(UP, 'nsubj'))
    assert rule.object.path == (PathStep(DOWN, 'nmod'),)


def test_empty_file_gives_empty_ruleset(tmp_path, service):
    assert len(load(tmp_path, service, '')) == 0


def test_schema_error_reports_line(tmp_path, service):
    text = CHILDREN_RULE + '- id: broken\n  kind: syntactic\n  trigger: word=x\n'
    with pytest.raises(RuleValidationError, match='line 7'):
        load(tmp_path, service, text)


def test_unknown_key_is_rejected(tmp_path, service):
    with pytest.raises(RuleValidationError):
        load(tmp_path, service, CHILDREN_RULE + '  priority: 3\n')


def test_broken_yaml_is_a_syntax_error(tmp_path, service):
    with pytest.raises(RuleSyntaxError):
        load(tmp_path, service, '- id: [unclosed\n')


def test_argument_with_wrong_prefix(tmp_path, service):
    with pytest.raises(RuleValidationError):
        load(tmp_path, service, CHILDREN_RULE.replace('SUBJ_Person', 'OBJ_Person', 1))


def test_duplicate_ids_are_rejected():
    with pytest.raises(RuleValidationError):
        validate_ruleset(RuleSet((children_rule(), children_rule())))


def test_saved_rules_use_explicit_directions(tmp_path, service):
    path = tmp_path / 'out.yaml'
    service.save_rules(path, RuleSet((children_rule(), surface('born-1', 'per:city_of_birth'))))
    text = path.read_text(encoding='utf-8')
    assert 'SUBJ_Person = >nmod:poss' in text
    assert service.parse_rules(path).rules == (children_rule(), surface('born-1', 'per:city_of_birth'))


def test_surface_rule_labels_literal_tokens():
    match = match_rule(surface('born-1', 'per:city_of_birth'), born_in())
    assert match.trigger_tokens == frozenset({1, 2, 3})
    assert match.label == 'per:city_of_birth'


def test_gap_matches_shortest_span():
    match = match_rule(surface('gap', 'per:city_of_birth', 'SUBJ-PER * in OBJ-CITY'), born_in())
    assert match.trigger_tokens == frozenset({3})


def test_surface_rule_needs_adjacent_literals():
    assert match_rule(surface('strict', 'per:city_of_birth', 'SUBJ-PER born OBJ-CITY'), born_in()) is None


def test_syntactic_rule_on_walkthrough():
    match = match_rule(children_rule(), walkthrough())
    assert match.trigger_tokens == frozenset({2})


def test_entity_type_gate():
    assert match_rule(children_rule(subj_type='City'), walkthrough()) is None


def test_annotation_bits_cover_trigger_tokens():
    labels = annotate_explanations(RuleSet((surface('born-1', 'per:city_of_birth'),)), [born_in()])
    assert labels['born'].bits == (0, 0, 1, 1, 1, 0, 0)
    assert labels['born'].source == RULE


def test_label_mismatch_is_not_annotated():
    labels = annotate_explanations(RuleSet((surface('born-1', 'per:city_of_death'),)), [born_in()])
    assert labels == {}


def test_no_match_predicts_no_relation():
    assert predict_with_rules(RuleSet((children_rule(),)), born_in()) == NO_RELATION


def test_first_rule_wins():
    first, second = surface('a', 'per:city_of_birth'), surface('b', 'per:origin')
    assert predict_with_rules(RuleSet((first, second)), born_in()) == 'per:city_of_birth'
    assert predict_with_rules(RuleSet((second, first)), born_in()) == 'per:origin'


def test_rule_coverage_counts():
    rules = RuleSet((surface('born-1', 'per:city_of_birth'), children_rule()))
    report = rule_coverage(rules, [born_in(), walkthrough(), walkthrough('other', 'per:siblings'), visited()])
    assert report.positives == 3
    assert report.covered_positives == 2
    assert report.matched_instances == 3
    assert report.positive_coverage == pytest.approx(2 / 3)


def test_non_mapping_block_reports_its_line(tmp_path, service):
    with pytest.raises(RuleSyntaxError, match='line 7'):
        load(tmp_path, service, CHILDREN_RULE + '- just text\n')


def random_sentence(rng, n):
    left_len, right_len = rng.randint(1, 2), rng.randint(1, 2)
    left = rng.randint(0, n - left_len - right_len)
    right = rng.randint(left + left_len, n - right_len)
    spans = [(left, left + left_len - 1), (right, right + right_len - 1)]
    rng.shuffle(spans)
    return instance(
        f'random-{n}', ' '.join(rng.choice('abc') for _ in range(n)),
        [0] + list(range(1, n)), ['dep'] * n, spans[0], spans[1],
        subj_type='PER', obj_type='CITY', relation='per:city_of_birth',
    )


def random_pattern(rng):
    items = [PatternElement(SUBJ, 'PER'), PatternElement(OBJ, 'CITY')]
    items += [PatternElement(LITERAL, rng.choice('abc')) for _ in range(rng.randint(1, 3))]
    rng.shuffle(items)
    gaps = set(rng.sample(range(len(items) + 1), rng.randint(0, 2)))
    pattern = []
    for slot, item in enumerate(items + [None]):
        if slot in gaps:
            pattern.append(PatternElement(GAP))
        if item is not None:
            pattern.append(item)
    return tuple(pattern)


def walk_pattern(pattern, gaps, start, sentence):
    pos, gaps, literals = start, iter(gaps), []
    for element in pattern:
        if element.kind == GAP:
            pos += next(gaps)
            if pos > len(sentence):
                return None
        elif element.kind in (SUBJ, OBJ):
            span = sentence.subj_span if element.kind == SUBJ else sentence.obj_span
            if pos != span[0]:
                return None
            pos = span[1] + 1
        else:
            if pos >= len(sentence) or pos in sentence.entity_indices or sentence.tokens[pos].form != element.value:
                return None
            literals.append(pos)
            pos += 1
    return frozenset(literals)


def exhaustive_surface_match(pattern, sentence):
    n = len(sentence)
    width = sum(1 for element in pattern if element.kind == GAP)
    for start in range(n + 1):
        for gaps in itertools.product(range(n + 1), repeat=width):
            literals = walk_pattern(pattern, gaps, start, sentence)
            if literals is not None:
                return literals
    return None


def test_surface_match_equals_exhaustive_search():
    rng = random.Random(11)
    matched = 0
    for _ in range(300):
        sentence = random_sentence(rng, rng.randint(3, 12))
        pattern = random_pattern(rng)
        match = match_rule(SurfaceRule('r', 'per:city_of_birth', pattern), sentence)
        expected = exhaustive_surface_match(pattern, sentence)
        assert (None if match is None else match.trigger_tokens) == expected
        matched += expected is not None
    assert matched > 0


@pytest.fixture(scope='module')
def synthetic():
    service = SyntheticService(CorpusService(dao=None))
    spec = synthetic_spec(train=120, dev=10, test=10)
    return service.gen_synthetic(spec, 21), service.manual_rules(spec)


def test_annotations_grow_with_the_ruleset(synthetic):
    corpus, manual = synthetic
    rng = random.Random(3)
    pool = list(manual) + [surface('born-1', 'per:city_of_birth'), children_rule()]
    for _ in range(10):
        larger = [rule for rule in pool if rng.random() < 0.7]
        smaller = [rule for rule in larger if rng.random() < 0.5]
        small = annotate_explanations(RuleSet(tuple(smaller)), corpus.train)
        large = annotate_explanations(RuleSet(tuple(larger)), corpus.train)
        assert set(small) <= set(large)
        assert all(set(small[key].indices) <= set(large[key].indices) for key in small)


def test_annotations_come_from_matching_gold_label_rules(synthetic):
    corpus, manual = synthetic
    labels = annotate_explanations(manual, corpus.train)
    assert labels
    for sentence in corpus.train:
        matches = [match_rule(rule, sentence) for rule in manual if rule.label == sentence.gold_relation]
        matches = [match for match in matches if match is not None]
        if not sentence.is_positive or not matches:
            assert sentence.id not in labels
            continue
        triggers = frozenset().union(*(match.trigger_tokens for match in matches))
        assert set(labels[sentence.id].indices) == triggers - set(sentence.entity_indices)
