import pytest

from constants import DOWN, NO_RELATION
from dao.model.config import GenConfig
from dao.model.instance import ExplanationLabels, PathStep
from dao.model.rule import GEN_TRAIN, WORD, RuleSet, TriggerConstraint
from exceptions import RuleValidationError
from service.corpus import CorpusService
from service.evaluation import compare_rulesets
from service.rule_engine import match_rule
from service.rule_gen import build_ruleset, dedupe, generate_rule, merge_rulesets, trigger_run
from service.synthetic import SyntheticService
from tests.factories import synthetic_spec, walkthrough


def rationale(instance, indices):
    return ExplanationLabels.from_indices(indices, len(instance))


def first_context_rules(instances, prefix='gen'):
    rules = []
    for n, instance in enumerate(instances):
        if instance.is_positive:
            rule = generate_rule(instance, instance.gold_relation, rationale(instance, instance.context_indices()[:1]),
                                 RuleSet(), rule_id=f'{prefix}-{n}')
            if rule is not None:
                rules.append(rule)
    return RuleSet(tuple(rules))


@pytest.fixture(scope='module')
def synthetic():
    service = SyntheticService(CorpusService(dao=None))
    spec = synthetic_spec()
    return service.gen_synthetic(spec, 13), service.manual_rules(spec)


def test_walkthrough_rule(walk):
    rule = generate_rule(walk, 'per:children', rationale(walk, [2]), RuleSet())
    assert rule.label == 'per:children'
    assert rule.trigger == TriggerConstraint(WORD, (('daughter',),))
    assert rule.subject.entity_type == 'PERSON'
    assert rule.subject.path == (PathStep(DOWN, 'nmod:poss'),)
    assert rule.object.path == (PathStep(DOWN, 'appos'),)
    assert rule.provenance == GEN_TRAIN


def test_empty_or_entity_only_rationale_gives_nothing(walk):
    assert generate_rule(walk, 'per:children', rationale(walk, []), RuleSet()) is None
    assert generate_rule(walk, 'per:children', rationale(walk, [0, 4]), RuleSet()) is None
    assert generate_rule(walk, NO_RELATION, rationale(walk, [2]), RuleSet()) is None


def test_manual_match_skips_instance(walk):
    manual = RuleSet((generate_rule(walk, 'per:children', rationale(walk, [2]), RuleSet(), rule_id='m'),))
    assert generate_rule(walk, 'per:children', rationale(walk, [2]), manual) is None
    assert generate_rule(walk, 'per:children', rationale(walk, [2]), manual, skip_if_manual_match=False) is not None


def test_trigger_run_prefers_longest_then_nearest(walk):
    assert trigger_run(walk, [6, 7, 2]) == [6, 7]
    assert trigger_run(walk, [2, 7]) == [2]


def test_generated_rules_match_their_source(synthetic):
    corpus, _ = synthetic
    for instance in corpus.test:
        if not instance.is_positive:
            continue
        rule = generate_rule(instance, instance.gold_relation, rationale(instance, instance.context_indices()[:1]),
                             RuleSet())
        match = match_rule(rule, instance)
        assert match is not None and match.label == instance.gold_relation, instance.id


def test_no_positive_predictions_give_empty_ruleset():
    assert len(build_ruleset([], RuleSet(), GenConfig())) == 0


def test_duplicate_instances_give_one_rule():
    triples = [(walkthrough(f'w{i}'), 'per:children', rationale(walkthrough(), [2])) for i in range(3)]
    rules = build_ruleset(triples, RuleSet(), GenConfig())
    assert [rule.id for rule in rules] == ['gen-train-00001']
    assert len(build_ruleset(triples, RuleSet(), GenConfig(dedupe=False))) == 3


def test_merge_of_one_set_is_itself(synthetic):
    _, manual = synthetic
    assert merge_rulesets([manual]) == manual


def test_merge_is_idempotent(synthetic):
    _, manual = synthetic
    assert merge_rulesets([manual, manual]) == RuleSet(tuple(dedupe(manual)))


def test_merge_rejects_conflicting_ids(walk):
    a = generate_rule(walk, 'per:children', rationale(walk, [2]), RuleSet(), rule_id='same')
    b = generate_rule(walk, 'per:children', rationale(walk, [6]), RuleSet(), rule_id='same')
    with pytest.raises(RuleValidationError):
        merge_rulesets([RuleSet((a,)), RuleSet((b,))])


def test_union_never_lowers_recall(synthetic):
    corpus, manual = synthetic
    generated = first_context_rules(corpus.test)
    reports = compare_rulesets({'manual': manual, 'generated': generated}, [['manual', 'generated']], corpus.test)
    by_name = {report.name: report for report in reports}
    assert set(by_name) == {'manual', 'generated', 'manual+generated'}
    assert by_name['manual+generated'].recall >= by_name['manual'].recall
