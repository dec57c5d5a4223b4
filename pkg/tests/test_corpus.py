import json
import random
from collections import deque

import pytest

from constants import CLS_ID, DOWN, ROOT, UNK_ID, UP
from dao.corpus import CorpusDAO
from dao.model.instance import PathStep, RelationInstance, RelationRecordSchema, Token, instance_to_record
from exceptions import CorpusLoadError, CorpusValidationError
from service.corpus import CorpusService, build_vocabularies, mask_entities, shortest_dep_path
from tests.factories import born_in, instance, record, visited, walkthrough, walkthrough_record


@pytest.fixture
def corpus_service():
    return CorpusService(dao=CorpusDAO())


def write_lines(path, records):
    path.write_text(''.join(json.dumps(r) + '\n' for r in records), encoding='utf-8')


def test_walkthrough_record_has_nine_tokens(walk):
    assert len(walk) == 9
    assert walk.subj_indices == range(0, 1)
    assert walk.entity_indices == frozenset({0, 4})
    assert walk.tokens[2].head == 6
    assert walk.tokens[6].head == ROOT
    assert walk.tokens[0].lemma == 'john'


def test_load_directory_with_splits(tmp_path, corpus_service):
    write_lines(tmp_path / 'train.jsonl', [walkthrough_record('a'), walkthrough_record('b', 'no_relation')])
    write_lines(tmp_path / 'test.jsonl', [walkthrough_record('c')])
    corpus = corpus_service.load_corpus(tmp_path)
    assert [i.id for i in corpus.train] == ['a', 'b']
    assert corpus.dev == ()
    assert [i.id for i in corpus.test] == ['c']
    assert corpus.relation_vocab == ('per:children',)


def test_json_release_layout(tmp_path, corpus_service):
    (tmp_path / 'train.json').write_text(json.dumps([walkthrough_record('a')]), encoding='utf-8')
    corpus = corpus_service.load_corpus(tmp_path, 'json')
    assert corpus.train[0] == walkthrough('a')


def test_empty_file_gives_empty_corpus(tmp_path, corpus_service):
    path = tmp_path / 'train.jsonl'
    path.write_text('', encoding='utf-8')
    corpus = corpus_service.load_corpus(path)
    assert corpus.train == corpus.dev == corpus.test == ()
    assert corpus.relation_vocab == ()
    assert corpus.token_vocab.symbols == ()


def test_head_cycle_is_rejected(tmp_path, corpus_service):
    bad = record('loop', 'a b c', [2, 1, 0], ['dep', 'dep', 'root'], (0, 0), (2, 2))
    write_lines(tmp_path / 'train.jsonl', [bad])
    with pytest.raises(CorpusValidationError) as error:
        corpus_service.load_corpus(tmp_path)
    assert error.value.instance_id == 'loop'


def test_negative_head_is_rejected(tmp_path, corpus_service):
    bad = record('negative', 'a b c', [2, -7, 2], ['dep', 'root', 'dep'], (0, 0), (2, 2))
    assert RelationRecordSchema().load(bad).tokens[1].head == -8
    write_lines(tmp_path / 'train.jsonl', [bad])
    with pytest.raises(CorpusValidationError, match='out-of-range head'):
        corpus_service.load_corpus(tmp_path)


def test_head_zero_is_the_only_root_marker(walk):
    assert instance_to_record(walk)['stanford_head'] == [3, 1, 7, 3, 3, 3, 0, 7, 7]


def test_two_roots_are_rejected(tmp_path, corpus_service):
    bad = record('forest', 'a b c', [0, 1, 0], ['root', 'dep', 'root'], (0, 0), (2, 2))
    write_lines(tmp_path / 'train.jsonl', [bad])
    with pytest.raises(CorpusValidationError):
        corpus_service.load_corpus(tmp_path)


def test_missing_field_names_the_instance(tmp_path, corpus_service):
    bad = walkthrough_record('broken')
    del bad['relation']
    write_lines(tmp_path / 'train.jsonl', [bad])
    with pytest.raises(CorpusLoadError) as error:
        corpus_service.load_corpus(tmp_path)
    assert error.value.instance_id == 'broken'


def test_save_writes_every_split(tmp_path, corpus_service):
    corpus = CorpusService.build([walkthrough()], [born_in()], [visited()])
    paths = corpus_service.save_corpus(tmp_path, corpus)
    assert [p.name for p in paths] == ['train.jsonl', 'dev.jsonl', 'test.jsonl']
    assert corpus_service.load_corpus(tmp_path).dev == (born_in(),)


def test_mask_entities_born_in(born):
    _, vocab = build_vocabularies([born])
    masked = mask_entities(born, vocab)
    assert [vocab.symbol(i) for i in masked.ids] == ['[CLS]', 'SUBJ-PER', 'was', 'born', 'in', 'OBJ-CITY', '.']
    assert masked.ids[0] == CLS_ID
    assert masked.token_map == (None, 0, 1, 2, 3, 4, 5)


def test_multi_token_subject_is_masked_per_token():
    smith = instance('smith', 'John Smith was born in Boston .', [4, 1, 4, 0, 6, 4, 4],
                     ['nsubj:pass', 'flat', 'aux:pass', 'root', 'case', 'obl', 'punct'],
                     (0, 1), (5, 5), subj_type='PER', obj_type='CITY')
    _, vocab = build_vocabularies([smith])
    masked = mask_entities(smith, vocab)
    assert len(masked) == 1 + len(smith)
    assert masked.ids[1] == masked.ids[2] == vocab.index('SUBJ-PER')


def test_unknown_forms_map_to_unk(born):
    _, vocab = build_vocabularies([visited()])
    masked = mask_entities(born, vocab)
    assert vocab.symbol(masked.ids[3]) == '[UNK]'


def test_vocabularies_take_forms_from_train_and_labels_from_all_splits():
    relations, vocab = build_vocabularies([walkthrough()], [], [born_in()])
    assert relations == ('per:children', 'per:city_of_birth')
    assert vocab.index('daughter') != UNK_ID
    assert vocab.index('born') == UNK_ID
    assert UNK_ID not in (vocab.index('SUBJ-PER'), vocab.index('OBJ-CITY'))


def test_walkthrough_paths(walk):
    subj_path, ends = shortest_dep_path(walk, [2], walk.subj_indices)
    assert subj_path == (PathStep(DOWN, 'nmod:poss'),)
    assert ends == (2, 0)
    obj_path, _ = shortest_dep_path(walk, [2], walk.obj_indices)
    assert obj_path == (PathStep(DOWN, 'appos'),)


def test_upward_path(walk):
    path, _ = shortest_dep_path(walk, [0], [6])
    assert path == (PathStep(UP, 'nmod:poss'), PathStep(UP, 'nsubj'))


def test_path_to_itself_is_empty(walk):
    assert shortest_dep_path(walk, [3], [3]) == ((), (3, 3))


def bfs_distance(heads: list, source: int, target: int) -> int:
    neighbours = {i: set() for i in range(len(heads))}
    for child, head in enumerate(heads):
        if head != ROOT:
            neighbours[child].add(head)
            neighbours[head].add(child)
    queue, seen = deque([(source, 0)]), {source}
    while queue:
        node, distance = queue.popleft()
        if node == target:
            return distance
        for nxt in neighbours[node] - seen:
            seen.add(nxt)
            queue.append((nxt, distance + 1))
    raise AssertionError('tree is disconnected')


def test_path_length_matches_breadth_first_search():
    rng = random.Random(3)
    for trial in range(100):
        n = rng.randint(1, 10)
        order = list(range(n))
        rng.shuffle(order)
        heads = [ROOT] * n
        for k in range(1, n):
            heads[order[k]] = order[rng.randrange(k)]
        tree = RelationInstance(f'tree-{trial}', tuple(Token(str(i), str(i), 'X', 'O', h, f'r{i}')
                                                       for i, h in enumerate(heads)), (0, 0), (0, 0), 'A', 'B')
        for a in range(n):
            for b in range(n):
                steps, _ = shortest_dep_path(tree, [a], [b])
                assert len(steps) == bfs_distance(heads, a, b)


def random_tree(rng: random.Random, n: int, name: str) -> RelationInstance:
    order = list(range(n))
    rng.shuffle(order)
    heads = [ROOT] * n
    for k in range(1, n):
        heads[order[k]] = order[rng.randrange(k)]
    return RelationInstance(name, tuple(Token(str(i), str(i), 'X', 'O', h, f'r{i}') for i, h in enumerate(heads)),
                            (0, 0), (0, 0), 'A', 'B')


def test_reversed_endpoints_reverse_the_path():
    flip = {UP: DOWN, DOWN: UP}
    rng = random.Random(5)
    for trial in range(100):
        tree = random_tree(rng, rng.randint(2, 10), f'sym-{trial}')
        a, b = rng.randrange(len(tree)), rng.randrange(len(tree))
        forward, _ = shortest_dep_path(tree, [a], [b])
        backward, _ = shortest_dep_path(tree, [b], [a])
        assert backward == tuple(PathStep(flip[s.direction], s.deprel) for s in reversed(forward))
