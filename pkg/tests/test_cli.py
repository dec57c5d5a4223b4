import json

import pytest
import yaml
from click.testing import CliRunner

from app import app
from tests.factories import CONFIGS

TRAIN_CONFIG = {
    't_up': 0.8, 't_low': 0.2, 'burn_in_epochs': 1, 'total_epochs': 2, 'candidate_cap': 16,
    'model': {'d': 16, 'layers': 1, 'heads': 2, 'ff_mult': 2, 'dropout': 0.0, 'seed': 7, 'batch_size': 8,
              'max_seq_len': 64},
}


def run(*args):
    result = CliRunner().invoke(app, [str(arg) for arg in args])
    assert result.exit_code == 0, result.output
    return result


def manifest(path):
    return json.loads(path.with_name(path.name + '.manifest.json').read_text(encoding='utf-8'))


@pytest.fixture(scope='module')
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp('cli')
    spec = yaml.safe_load((CONFIGS / 'synthetic.yaml').read_text(encoding='utf-8'))
    spec.update(train=60, dev=12, test=20)
    (root / 'spec.yaml').write_text(yaml.safe_dump(spec), encoding='utf-8')
    (root / 'train.yaml').write_text(yaml.safe_dump(TRAIN_CONFIG), encoding='utf-8')
    run('gen-data', '--spec', root / 'spec.yaml', '--seed', 3, '--out', root / 'data')
    data = root / 'data'
    run('train', '--corpus', data, '--rules', data / 'manual_rules.yaml', '--config', root / 'train.yaml',
        '--out', root / 'model.bin')
    return root


def test_gen_data_writes_splits_and_manifest(workspace):
    data = workspace / 'data'
    assert [len((data / f'{name}.jsonl').read_text().splitlines()) for name in ('train', 'dev', 'test')] == [60, 12, 20]
    record = manifest(data)
    assert record['command'] == 'gen-data'
    assert record['seeds'] == {'seed': 3}
    assert record['config_paths']['spec'].endswith('spec.yaml')


def test_train_writes_log(workspace):
    log = (workspace / 'model.bin.trainlog.jsonl').read_text().splitlines()
    assert [json.loads(line)['epoch'] for line in log] == [1, 2]
    assert manifest(workspace / 'model.bin')['outputs']['train_log'].endswith('.trainlog.jsonl')


def test_predict_and_evaluate(workspace):
    data, out = workspace / 'data', workspace / 'preds.jsonl'
    run('predict', '--model', workspace / 'model.bin', '--corpus', data, '--split', 'test', '--out', out)
    assert len(out.read_text().splitlines()) == 20
    run('eval-rc', '--pred', out, '--corpus', data, '--out', workspace / 'rc.json')
    report = json.loads((workspace / 'rc.json').read_text())
    assert report['instances'] == 20
    table = (workspace / 'rc.table.txt').read_text().splitlines()
    assert table[0].split() == ['name', 'P', 'R', 'F1', 'TP', 'FP', 'FN', 'N']
    assert table[1].split()[0] == 'preds'
    run('eval-ec', '--pred', out, '--rules', data / 'manual_rules.yaml', '--corpus', data, '--out', workspace / 'ec.json')
    assert 0.0 <= json.loads((workspace / 'ec.json').read_text())['f1'] <= 1.0


def test_rule_generation_and_comparison(workspace):
    data, model = workspace / 'data', workspace / 'model.bin'
    gold, predicted = workspace / 'gen-gold.yaml', workspace / 'gen-test.yaml'
    run('gen-rules', '--model', model, '--corpus', data, '--manual', data / 'manual_rules.yaml',
        '--train-config', workspace / 'train.yaml', '--out', gold)
    run('gen-rules', '--model', model, '--corpus', data, '--split', 'test', '--mode', 'predicted',
        '--manual', data / 'manual_rules.yaml', '--out', predicted)
    assert manifest(gold)['inputs']['mode'] == 'gold'
    rules = yaml.safe_load(gold.read_text()) or []
    assert all(rule['id'].startswith('gen-train-') for rule in rules)

    preds = workspace / 'rule-preds.jsonl'
    run('run-rules', '--rules', f'{data / "manual_rules.yaml"},{gold}', '--corpus', data, '--out', preds)
    records = [json.loads(line) for line in preds.read_text().splitlines()]
    assert len(records) == 20 and {r['method'] for r in records} == {'rules'}

    result = run('rule-coverage', '--rules', data / 'manual_rules.yaml', '--corpus', data,
                 '--out', workspace / 'coverage.json')
    assert 'positives covered' in result.output

    compared = workspace / 'compare.jsonl'
    run('compare-rules', '--rules', f'manual={data / "manual_rules.yaml"}', '--rules', f'gold={gold}',
        '--combine', 'manual+gold', '--corpus', data, '--out', compared)
    names = [json.loads(line)['name'] for line in compared.read_text().splitlines()]
    assert names == ['manual', 'gold', 'manual+gold']
    assert (workspace / 'compare.table.txt').exists()


def test_explain_baselines(workspace):
    data = workspace / 'data'
    run('explain', '--corpus', data, '--method', 'all-between', '--out', workspace / 'between.jsonl')
    run('explain', '--model', workspace / 'model.bin', '--corpus', data, '--method', 'attention', '--topn', 2,
        '--out', workspace / 'attention.jsonl')
    records = [json.loads(line) for line in (workspace / 'attention.jsonl').read_text().splitlines()]
    assert all(len(r['rationale']) == 2 and r['method'] == 'attention' for r in records)


def test_explain_gold_size_needs_rules(workspace):
    result = CliRunner().invoke(app, ['explain', '--corpus', str(workspace / 'data'), '--method', 'all-between',
                                      '--match-gold-size', '--out', str(workspace / 'x.jsonl')])
    assert result.exit_code == 2


def test_ec_ablation_gives_empty_rationales(workspace):
    data, model, out = workspace / 'data', workspace / 'no-ec.bin', workspace / 'no-ec.jsonl'
    run('train', '--corpus', data, '--rules', data / 'manual_rules.yaml', '--config', workspace / 'train.yaml',
        '--ablate', 'ec', '--out', model)
    run('predict', '--model', model, '--corpus', data, '--out', out)
    assert all(json.loads(line)['rationale'] == [] for line in out.read_text().splitlines())


def test_bad_config_exits_with_error(workspace, tmp_path):
    bad = tmp_path / 'bad.yaml'
    bad.write_text(yaml.safe_dump(dict(TRAIN_CONFIG, t_low=0.9)), encoding='utf-8')
    result = CliRunner().invoke(app, ['train', '--corpus', str(workspace / 'data'), '--rules',
                                      str(workspace / 'data' / 'manual_rules.yaml'), '--config', str(bad),
                                      '--out', str(tmp_path / 'm.bin')])
    assert result.exit_code == 1
    assert 't_low' in result.output


def test_plausibility_of_matching_annotator(workspace):
    data, between = workspace / 'data', workspace / 'between-test.jsonl'
    run('explain', '--corpus', data, '--method', 'all-between', '--out', between)
    records = [json.loads(line) for line in between.read_text().splitlines()]
    annotated = [r for r in records if r['rationale']][:5]
    lines = [json.dumps({'id': r['id'], 'annotator_a': r['rationale'], 'annotator_b': []}) for r in annotated]
    (workspace / 'humans.jsonl').write_text('\n'.join(lines) + '\n', encoding='utf-8')
    run('eval-plausibility', '--pred', between, '--annotations', workspace / 'humans.jsonl', '--corpus', data,
        '--out', workspace / 'plausibility.json')
    report = json.loads((workspace / 'plausibility.json').read_text())
    assert report['instances'] == len(annotated) > 0
    assert report['f1'] == pytest.approx(1.0)
