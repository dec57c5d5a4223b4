import json
from pathlib import Path

from marshmallow import Schema, ValidationError

from config import Config
from exceptions import WorkbenchError


class RecordDAO:
    """
    Класс описывает Data Access Object (DAO) для машиночитаемых записей:
    предсказаний, отчетов, журналов обучения и манифестов запусков.
    """

    def __init__(self, encoding: str = Config.ENCODING):
        self.encoding = encoding

    def _prepare(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def write_lines(self, path: Path, items, schema: Schema) -> None:
        """
        Метод записывает объекты по одному JSON-объекту на строку.
        :param path: Путь к файлу.
        :param items: Объекты для сериализации.
        :param schema: Схема marshmallow для сериализации.
        """
        text = ''.join(json.dumps(schema.dump(item), ensure_ascii=False, sort_keys=True) + '\n' for item in items)
        self._prepare(path).write_text(text, encoding=self.encoding)

    def read_lines(self, path: Path, schema: Schema) -> list:
        """
        Метод читает файл с одним JSON-объектом на строку.
        :param path: Путь к файлу.
        :param schema: Схема marshmallow для десериализации.
        :return: Список объектов.
        """
        items = []
        for number, line in enumerate(Path(path).read_text(encoding=self.encoding).splitlines(), start=1):
            if not line.strip():
                continue
            try:
                items.append(schema.load(json.loads(line)))
            except (json.JSONDecodeError, ValidationError) as e:
                raise WorkbenchError(f'{path}:{number}: {e}') from e
        return items

    def write_json(self, path: Path, item, schema: Schema) -> None:
        text = json.dumps(schema.dump(item), ensure_ascii=False, sort_keys=True, indent=2) + '\n'
        self._prepare(path).write_text(text, encoding=self.encoding)

    def write_text(self, path: Path, text: str) -> None:
        self._prepare(path).write_text(text, encoding=self.encoding)
