class WorkbenchError(Exception):
    """
    Базовое исключение рабочего стенда. Все ошибки предметной области наследуются от него,
    чтобы команды командной строки могли превратить их в ненулевой код выхода.
    """


class CorpusLoadError(WorkbenchError):
    def __init__(self, instance_id, message: str):
        self.instance_id = instance_id
        super().__init__(f'instance {instance_id}: {message}')


class CorpusValidationError(WorkbenchError):
    def __init__(self, instance_id, message: str):
        self.instance_id = instance_id
        super().__init__(f'instance {instance_id}: {message}')


class RuleSyntaxError(WorkbenchError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f'line {line}: {message}')


class RuleValidationError(WorkbenchError):
    pass


class ConfigError(WorkbenchError):
    pass


class CheckpointError(WorkbenchError):
    pass


class SequenceTooLongError(WorkbenchError):
    pass


class TrainingError(WorkbenchError):
    def __init__(self, batch_index: int, message: str):
        self.batch_index = batch_index
        super().__init__(f'batch {batch_index}: {message}')


class EvaluationError(WorkbenchError):
    pass


class UnknownLabelError(WorkbenchError):
    def __init__(self, label: str, classes: tuple):
        self.label = label
        super().__init__(f'label {label!r} is not one of the model classes {list(classes)}')
