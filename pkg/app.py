import logging

import click

from config import Config
from constants import VERSION
from views.data import data_ns
from views.evaluate import evaluate_ns
from views.explain import explain_ns
from views.rules import rules_ns
from views.train import train_ns


def create_app(config_object: Config) -> click.Group:
    """
    Функция создает группу команд click с необходимой конфигурацией
    :param config_object: Конфигурация приложения
    :return: Группа команд
    """
    @click.group(help='Relation extraction workbench: rules, faithful rationales and rule generation.')
    @click.version_option(VERSION)
    @click.option('--verbose', is_flag=True, help='Log debug messages.')
    def app(verbose: bool) -> None:
        level = logging.DEBUG if verbose or config_object.DEBUG else config_object.LOG_LEVEL
        logging.basicConfig(level=level, format=config_object.LOG_FORMAT, force=True)

    register_extensions(app)
    return app


def register_extensions(app: click.Group) -> None:
    """
    Функция регистрирует команды всех групп в корневой группе.
    :param app: Корневая группа команд.
    :return: None
    """
    for namespace in (data_ns, train_ns, rules_ns, evaluate_ns, explain_ns):
        for command in namespace.commands.values():
            app.add_command(command)


app = create_app(Config())

if __name__ == '__main__':
    app()
