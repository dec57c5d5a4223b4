class Config(object):
    DEBUG = False
    LOG_LEVEL = 'INFO'
    LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'
    ENCODING = 'utf-8'
    SEED = 13
    CORPUS_FORMAT = 'jsonl'
    CORPUS_SUFFIX = {'jsonl': '.jsonl', 'json': '.json'}
    MANUAL_RULES_FILE = 'manual_rules.yaml'
    MANIFEST_SUFFIX = '.manifest.json'
    TRAIN_LOG_SUFFIX = '.trainlog.jsonl'
