import json
from pathlib import Path
from typing import Mapping, Optional

from marshmallow import ValidationError

from config import Config
from dao.model.instance import RelationInstance
from dao.model.prediction import HumanAnnotation, HumanAnnotationSchema
from exceptions import EvaluationError


def check_annotation(annotation: HumanAnnotation, instance: Optional[RelationInstance]) -> None:
    """
    Функция проверяет, что индексы обоих аннотаторов лежат в пределах предложения и вне сущностей.

    :param annotation: Ручная разметка одного экземпляра.
    :param instance: Экземпляр корпуса с тем же id, либо None.
    :return: None, либо исключение EvaluationError.
    """
    if instance is None:
        raise EvaluationError(f'instance {annotation.id}: not in the evaluated split')
    for name, indices in (('annotator_a', annotation.annotator_a), ('annotator_b', annotation.annotator_b)):
        outside = sorted(i for i in indices if not 0 <= i < len(instance))
        if outside:
            raise EvaluationError(f'instance {annotation.id}: {name} index {outside} outside {len(instance)} tokens')
        entities = sorted(indices & instance.entity_indices)
        if entities:
            raise EvaluationError(f'instance {annotation.id}: {name} marks entity tokens {entities}')


class HumanAnnotationDAO:
    """
    Класс описывает Data Access Object (DAO) для файлов ручной разметки объяснений.
    Каждая строка файла содержит id экземпляра и два списка индексов токенов (по одному на аннотатора).
    """

    def __init__(self, encoding: str = Config.ENCODING):
        self.encoding = encoding
        self.schema = HumanAnnotationSchema()

    def load(self, path: Path,
             instances: Optional[Mapping[str, RelationInstance]] = None) -> dict[str, HumanAnnotation]:
        """
        Метод читает файл разметки.
        :param path: Путь к файлу.
        :param instances: Словарь id -> экземпляр; если задан, индексы проверяются по предложениям.
        :return: Словарь id -> HumanAnnotation.
        """
        annotations = {}
        lines = Path(path).read_text(encoding=self.encoding).splitlines()
        for number, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                annotation = self.schema.load(json.loads(line))
            except json.JSONDecodeError as e:
                raise EvaluationError(f'{path}:{number}: invalid JSON: {e.msg}') from e
            except ValidationError as e:
                raise EvaluationError(f'{path}:{number}: missing annotator or id {e.messages}') from e
            if instances is not None:
                try:
                    check_annotation(annotation, instances.get(annotation.id))
                except EvaluationError as e:
                    raise EvaluationError(f'{path}:{number}: {e}') from e
            annotations[annotation.id] = annotation
        return annotations
