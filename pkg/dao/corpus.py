import json
import logging
from pathlib import Path

from marshmallow import ValidationError

from config import Config
from dao.model.instance import RelationInstance, RelationRecordSchema, instance_to_record
from exceptions import ConfigError, CorpusLoadError

logger = logging.getLogger(__name__)


class CorpusDAO:
    """
    Класс описывает Data Access Object (DAO) для работы с файлами корпуса.
    Поддерживаются два формата: ``jsonl`` (одна запись на строку) и ``json`` (массив записей).
    """

    def __init__(self, encoding: str = Config.ENCODING):
        """
        Метод инициализирует DAO.
        :param encoding: Кодировка файлов корпуса.
        """
        self.encoding = encoding
        self.schema = RelationRecordSchema()

    @staticmethod
    def split_path(directory: Path, split: str, fmt: str) -> Path:
        if fmt not in Config.CORPUS_SUFFIX:
            raise ConfigError(f'unknown corpus format {fmt!r}')
        return Path(directory) / f'{split}{Config.CORPUS_SUFFIX[fmt]}'

    def read_records(self, path: Path, fmt: str) -> list:
        """
        Метод читает сырые записи из файла.
        :param path: Путь к файлу.
        :param fmt: Идентификатор формата (jsonl или json).
        :return: Список словарей.
        """
        text = Path(path).read_text(encoding=self.encoding)
        if fmt == 'jsonl':
            records = []
            for number, line in enumerate(text.splitlines(), start=1):
                if not line.strip():
                    continue
                try:
                    records.append(json.loads(line))
                except json.JSONDecodeError as e:
                    raise CorpusLoadError(f'<line {number}>', f'invalid JSON: {e.msg}') from e
            return records
        if fmt == 'json':
            if not text.strip():
                return []
            try:
                records = json.loads(text)
            except json.JSONDecodeError as e:
                raise CorpusLoadError('<file>', f'invalid JSON: {e.msg}') from e
            if not isinstance(records, list):
                raise CorpusLoadError('<file>', 'expected a JSON array of records')
            return records
        raise ConfigError(f'unknown corpus format {fmt!r}')

    def load(self, path: Path, fmt: str) -> list[RelationInstance]:
        """
        Метод загружает экземпляры отношений из файла и проверяет обязательные поля.
        :param path: Путь к файлу.
        :param fmt: Идентификатор формата.
        :return: Список экземпляров RelationInstance.
        """
        instances = []
        for position, record in enumerate(self.read_records(path, fmt)):
            instance_id = record.get('id', f'#{position}') if isinstance(record, dict) else f'#{position}'
            try:
                instances.append(self.schema.load(record))
            except ValidationError as e:
                raise CorpusLoadError(instance_id, f'malformed record {e.messages}') from e
        logger.debug('loaded %d instances from %s', len(instances), path)
        return instances

    def save(self, path: Path, instances, fmt: str = Config.CORPUS_FORMAT) -> None:
        """
        Метод записывает экземпляры в файл в заданном формате.
        :param path: Путь к файлу.
        :param instances: Экземпляры RelationInstance.
        :param fmt: Идентификатор формата.
        """
        records = [instance_to_record(instance) for instance in instances]
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        if fmt == 'jsonl':
            text = ''.join(json.dumps(record, ensure_ascii=False, sort_keys=True) + '\n' for record in records)
        elif fmt == 'json':
            text = json.dumps(records, ensure_ascii=False, sort_keys=True, indent=1)
        else:
            raise ConfigError(f'unknown corpus format {fmt!r}')
        path.write_text(text, encoding=self.encoding)
