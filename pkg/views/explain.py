from pathlib import Path

import click

from dao.model.prediction import PredictionSchema
from helpers import corpus_options, handles_errors, path_list, split_option, writes_manifest
from implemented import attribution_service, corpus_service, neural_service, record_dao, rule_service
from service.attribution import METHODS
from service.rule_engine import annotate_explanations
from service.rule_gen import merge_rulesets

explain_ns = click.Group('explain', help='Rationales from the model and baseline attribution methods.')


@explain_ns.command('explain')
@click.option('--model', 'model_path', type=click.Path(exists=True, dir_okay=False, path_type=Path))
@corpus_options
@split_option()
@click.option('--method', type=click.Choice(METHODS), required=True)
@click.option('--topn', type=int, default=0, show_default=True, help='Tokens kept by attention, saliency, occlusion.')
@click.option('--match-gold-size', is_flag=True,
              help='Keep as many tokens as the rules annotate; other instances fall back to --topn.')
@click.option('--rules', callback=path_list, help='Comma-separated rule files for --match-gold-size.')
@click.option('--out', type=click.Path(dir_okay=False, path_type=Path), required=True)
@handles_errors
@writes_manifest
def explain(model_path: Path, corpus: Path, fmt: str, split: str, method: str, topn: int, match_gold_size: bool,
            rules: list, out: Path) -> dict:
    """
    Записывает обоснования выбранного метода для каждого экземпляра.
    """
    if match_gold_size and not rules:
        raise click.UsageError('--match-gold-size needs --rules')
    instances = corpus_service.load_corpus(corpus, fmt).split(split)
    sizes = {}
    if match_gold_size:
        annotations = annotate_explanations(merge_rulesets(rule_service.parse_many(rules)), instances)
        sizes = {instance_id: len(labels.indices) for instance_id, labels in annotations.items()}
    model = neural_service.load(model_path) if model_path else None
    predictions = attribution_service.explain(method, model, instances, sizes, topn)
    record_dao.write_lines(out, predictions, PredictionSchema())
    return {'rationales': out}
