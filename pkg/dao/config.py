from pathlib import Path

import yaml
from marshmallow import Schema, ValidationError

from config import Config
from dao.model.config import GenConfig, GenConfigSchema, TrainConfig, TrainConfigSchema
from dao.model.generator import GeneratorSpec, GeneratorSpecSchema
from exceptions import ConfigError


class ConfigDAO:
    """
    Класс описывает Data Access Object (DAO) для YAML-файлов конфигурации.
    """

    def __init__(self, encoding: str = Config.ENCODING):
        self.encoding = encoding

    def _load(self, path: Path, schema: Schema):
        try:
            data = yaml.safe_load(Path(path).read_text(encoding=self.encoding)) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f'{path}: {e}') from e
        if not isinstance(data, dict):
            raise ConfigError(f'{path}: expected a mapping at the top level')
        try:
            return schema.load(data)
        except ValidationError as e:
            raise ConfigError(f'{path}: {e.messages}') from e

    def load_train_config(self, path: Path) -> TrainConfig:
        """
        Метод загружает конфигурацию обучения.
        :param path: Путь к YAML-файлу.
        :return: TrainConfig
        """
        return self._load(path, TrainConfigSchema())

    def load_gen_config(self, path: Path) -> GenConfig:
        return self._load(path, GenConfigSchema())

    def load_generator_spec(self, path: Path) -> GeneratorSpec:
        """
        Метод загружает описание синтетического корпуса.
        :param path: Путь к YAML-файлу.
        :return: GeneratorSpec
        """
        return self._load(path, GeneratorSpecSchema())
