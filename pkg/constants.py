VERSION = '1.0.0'

NO_RELATION = 'no_relation'

PAD_TOKEN = '[PAD]'
UNK_TOKEN = '[UNK]'
CLS_TOKEN = '[CLS]'
RESERVED_TOKENS = (PAD_TOKEN, UNK_TOKEN, CLS_TOKEN)
PAD_ID, UNK_ID, CLS_ID = 0, 1, 2

SUBJ_PREFIX = 'SUBJ-'
OBJ_PREFIX = 'OBJ-'
RULE_SUBJ_PREFIX = 'SUBJ_'
RULE_OBJ_PREFIX = 'OBJ_'
GAP = '*'

ROOT = -1
UP = 'UP'
DOWN = 'DOWN'

CHECKPOINT_MAGIC = b'RXF1'
CHECKPOINT_VERSION = 1

SPLITS = ('train', 'dev', 'test')
