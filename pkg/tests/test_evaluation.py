import json

import pytest

from constants import NO_RELATION
from dao.annotation import HumanAnnotationDAO
from dao.model.prediction import HumanAnnotation
from dao.model.report import LabelCounts
from exceptions import EvaluationError
from service.evaluation import ec_overlap, format_table, plausibility, rc_micro

GOLDS = {'a': 'r1', 'b': 'r1', 'c': 'r2', 'd': 'r2', 'e': NO_RELATION, 'f': 'r1'}
PREDS = {'a': 'r1', 'b': 'r1', 'c': 'r2', 'd': NO_RELATION, 'e': 'r1', 'f': NO_RELATION}


def test_rc_micro_counts():
    report = rc_micro(PREDS, GOLDS)
    assert (report.tp, report.fp, report.fn) == (3, 1, 2)
    assert report.precision == pytest.approx(0.75)
    assert report.recall == pytest.approx(0.6)
    assert report.f1 == pytest.approx(2 / 3)
    assert report.per_label == (LabelCounts('r1', 2, 1, 1), LabelCounts('r2', 1, 0, 1))


def test_rc_micro_all_correct():
    report = rc_micro(GOLDS, GOLDS)
    assert (report.precision, report.recall, report.f1) == (1.0, 1.0, 1.0)


def test_rc_micro_all_no_relation_scores_zero():
    report = rc_micro({key: NO_RELATION for key in GOLDS}, GOLDS)
    assert (report.precision, report.recall, report.f1) == (0.0, 0.0, 0.0)
    assert report.fn == 5


def test_wrong_label_is_both_fp_and_fn():
    report = rc_micro({'a': 'r2'}, {'a': 'r1'})
    assert (report.tp, report.fp, report.fn) == (0, 1, 1)


def test_rc_micro_rejects_id_mismatch():
    with pytest.raises(EvaluationError):
        rc_micro({'a': 'r1'}, {'b': 'r1'})


def test_ec_overlap():
    assert ec_overlap({'a': [1, 2]}, {'a': [1, 2]}).f1 == 1.0
    assert ec_overlap({'a': [3]}, {'a': [1, 2]}).f1 == 0.0
    report = ec_overlap({'a': [1, 2], 'b': [5]}, {'a': [1, 2], 'b': [6]})
    assert report.f1 == pytest.approx(0.5)
    assert report.instances == 2


def test_ec_overlap_skips_empty_gold_and_missing_pred():
    report = ec_overlap({}, {'a': [1], 'b': []})
    assert report.instances == 1
    assert (report.precision, report.recall, report.fn) == (0.0, 0.0, 1)


def test_ec_overlap_drops_entity_tokens():
    report = ec_overlap({'a': [0, 2]}, {'a': [2]}, excluded={'a': frozenset({0})})
    assert report.precision == 1.0


def test_plausibility_takes_best_annotator():
    humans = {
        'x': HumanAnnotation('x', frozenset({1}), frozenset({1, 2, 3})),
        'y': HumanAnnotation('y', frozenset({6}), frozenset({7})),
        'z': HumanAnnotation('z', frozenset(), frozenset()),
    }
    report = plausibility({'x': [1, 2], 'y': [5]}, humans)
    assert report.instances == 2
    assert report.precision == pytest.approx(0.5)
    assert report.recall == pytest.approx(1 / 3)
    assert report.f1 == pytest.approx(0.4)
    assert (report.tp, report.fp, report.fn) == (2, 1, 2)


def write_annotations(tmp_path, *records):
    path = tmp_path / 'humans.jsonl'
    path.write_text('\n'.join(json.dumps(record) for record in records) + '\n', encoding='utf-8')
    return path


def test_annotations_inside_the_sentence_load(tmp_path, born):
    path = write_annotations(tmp_path, {'id': 'born', 'annotator_a': [2], 'annotator_b': [1, 2, 3]})
    humans = HumanAnnotationDAO().load(path, {'born': born})
    assert humans['born'].annotator_b == frozenset({1, 2, 3})


@pytest.mark.parametrize('record, message', [
    ({'id': 'born', 'annotator_a': [2], 'annotator_b': [6]}, 'annotator_b index'),
    ({'id': 'born', 'annotator_a': [-1], 'annotator_b': []}, 'annotator_a index'),
    ({'id': 'born', 'annotator_a': [2, 4], 'annotator_b': []}, 'entity tokens'),
    ({'id': 'elsewhere', 'annotator_a': [], 'annotator_b': []}, 'not in the evaluated split'),
])
def test_bad_annotations_are_rejected_with_their_line(tmp_path, born, record, message):
    good = {'id': 'born', 'annotator_a': [2], 'annotator_b': [3]}
    path = write_annotations(tmp_path, good, record)
    with pytest.raises(EvaluationError, match=f'humans.jsonl:2: .*{message}'):
        HumanAnnotationDAO().load(path, {'born': born})


def test_format_table():
    text = format_table([rc_micro(PREDS, GOLDS, name='model'), rc_micro(GOLDS, GOLDS, name='oracle')])
    lines = text.splitlines()
    assert lines[0].split() == ['name', 'P', 'R', 'F1', 'TP', 'FP', 'FN', 'N']
    assert lines[1].split() == ['model', '75.00', '60.00', '66.67', '3', '1', '2', '6']
    assert lines[2].split()[0] == 'oracle'
