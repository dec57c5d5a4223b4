import json
from pathlib import Path

import numpy as np

from constants import CHECKPOINT_MAGIC, CHECKPOINT_VERSION
from exceptions import CheckpointError

UINT32 = np.dtype('<u4')
FLOAT32 = np.dtype('<f4')


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise CheckpointError('checkpoint is truncated')
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def uint32(self, count: int = 1) -> np.ndarray:
        return np.frombuffer(self.take(UINT32.itemsize * count), dtype=UINT32)

    def floats(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(FLOAT32.itemsize * count), dtype=FLOAT32)


class CheckpointDAO:
    """
    Класс описывает Data Access Object (DAO) для бинарных файлов контрольных точек модели.

    Формат файла: магические байты, версия, длина и JSON-заголовок,
    затем тензоры в порядке объявления параметров (little-endian float32).
    """

    def save(self, path: Path, header: dict, tensors: list) -> None:
        """
        Метод записывает контрольную точку.
        :param path: Путь к файлу.
        :param header: Заголовок (конфигурация модели и словари).
        :param tensors: Список пар (имя, numpy-массив) в порядке объявления.
        """
        header_bytes = json.dumps(header, sort_keys=True, ensure_ascii=False).encode('utf-8')
        chunks = [
            CHECKPOINT_MAGIC,
            np.array([CHECKPOINT_VERSION, len(header_bytes)], dtype=UINT32).tobytes(),
            header_bytes,
            np.array([len(tensors)], dtype=UINT32).tobytes(),
        ]
        for name, array in tensors:
            name_bytes = name.encode('utf-8')
            array = np.asarray(array, dtype=FLOAT32)
            chunks.append(np.array([len(name_bytes)], dtype=UINT32).tobytes())
            chunks.append(name_bytes)
            chunks.append(np.array([array.ndim, *array.shape], dtype=UINT32).tobytes())
            chunks.append(np.ascontiguousarray(array).tobytes())
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(b''.join(chunks))

    def load(self, path: Path) -> tuple:
        """
        Метод читает контрольную точку и проверяет магические байты и версию.
        :param path: Путь к файлу.
        :return: Пара (заголовок, список пар (имя, numpy-массив)).
        """
        reader = _Reader(Path(path).read_bytes())
        if reader.take(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
            raise CheckpointError(f'{path} is not a model checkpoint (bad magic bytes)')
        version, header_length = (int(v) for v in reader.uint32(2))
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f'unsupported checkpoint version {version}, expected {CHECKPOINT_VERSION}')
        try:
            header = json.loads(reader.take(header_length).decode('utf-8'))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError(f'corrupt checkpoint header: {e}') from e
        tensors = []
        for _ in range(int(reader.uint32()[0])):
            name = reader.take(int(reader.uint32()[0])).decode('utf-8')
            ndim = int(reader.uint32()[0])
            shape = tuple(int(v) for v in reader.uint32(ndim)) if ndim else ()
            array = reader.floats(int(np.prod(shape, dtype=np.int64))).reshape(shape)
            tensors.append((name, array.copy()))
        if reader.offset != len(reader.data):
            raise CheckpointError('trailing bytes after the last tensor')
        return header, tensors
