import logging
import time
from functools import wraps
from pathlib import Path

import click

from config import Config
from constants import SPLITS, VERSION
from dao.model.report import RunManifest, RunManifestSchema
from exceptions import WorkbenchError
from implemented import record_dao

logger = logging.getLogger(__name__)

CONFIG_PARAMS = ('config', 'spec')
SEED_PARAMS = ('seed',)


def manifest_path(primary: Path) -> Path:
    return Path(str(primary) + Config.MANIFEST_SUFFIX)


def table_path(out: Path) -> Path:
    return out.with_name(out.stem + '.table.txt')


def _plain(value):
    if isinstance(value, (bool, int, float)):
        return value
    if isinstance(value, dict):
        return ','.join(f'{k}={v}' for k, v in value.items())
    if isinstance(value, (list, tuple)):
        return ','.join(str(v) for v in value)
    return str(value)


def handles_errors(func):
    """
    Функция-декоратор, превращающая ошибки предметной области в ненулевой код выхода команды.

    :param func: Декорируемая функция
    """
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except WorkbenchError as e:
            logger.debug('command failed', exc_info=True)
            raise click.ClickException(str(e)) from e

    return wrapper


def writes_manifest(func):
    """
    Функция-декоратор, записывающая манифест запуска рядом с основным результатом команды.
    Декорируемая функция возвращает словарь имя -> путь; первый путь считается основным.

    :param func: Декорируемая функция
    """
    @wraps(func)
    def wrapper(*args, **kwargs):
        started = time.perf_counter()
        outputs = func(*args, **kwargs)
        missing = [str(path) for path in outputs.values() if not Path(path).exists()]
        if missing:
            raise WorkbenchError(f'outputs were not written: {missing}')
        context = click.get_current_context()
        manifest = RunManifest(
            command=context.info_name,
            version=VERSION,
            wall_clock=round(time.perf_counter() - started, 3),
            config_paths={k: str(v) for k, v in kwargs.items() if k in CONFIG_PARAMS and v is not None},
            seeds={k: int(v) for k, v in kwargs.items() if k in SEED_PARAMS and v is not None},
            inputs={k: _plain(v) for k, v in kwargs.items()
                    if k not in CONFIG_PARAMS + SEED_PARAMS + ('out',) and v is not None},
            outputs={k: str(v) for k, v in outputs.items()},
        )
        primary = next(iter(outputs.values()))
        record_dao.write_json(manifest_path(primary), manifest, RunManifestSchema())
        logger.info('%s finished in %.1fs', manifest.command, manifest.wall_clock)
        return outputs

    return wrapper


def corpus_options(func):
    """
    Функция-декоратор, добавляющая команде параметры --corpus и --format.

    :param func: Декорируемая функция
    """
    func = click.option('--format', 'fmt', type=click.Choice(sorted(Config.CORPUS_SUFFIX)),
                        default=Config.CORPUS_FORMAT, show_default=True, help='Corpus file format.')(func)
    return click.option('--corpus', type=click.Path(exists=True, path_type=Path), required=True,
                        help='Corpus directory or single corpus file.')(func)


def split_option(default: str = 'test'):
    return click.option('--split', type=click.Choice(SPLITS), default=default, show_default=True)


def path_list(ctx, param, value):
    if value is None:
        return None
    paths = [Path(part) for part in value.split(',') if part.strip()]
    missing = [str(path) for path in paths if not path.exists()]
    if not paths or missing:
        raise click.BadParameter(f'missing files: {missing}' if missing else 'no files given')
    return paths
