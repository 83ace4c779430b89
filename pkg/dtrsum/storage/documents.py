import json
import logging
from pathlib import Path
from typing import TypeVar

from pydantic import BaseModel
from pydantic import ValidationError as PydanticValidationError

from dtrsum.core.errors import StorageError, ValidationError

logger = logging.getLogger(__name__)

Model = TypeVar("Model", bound=BaseModel)


def read_json(path) -> object:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise StorageError(f"cannot read {path}: {e}")
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path}: invalid JSON ({e})")


def write_json(path, payload) -> None:
    """write a JSON document with sorted keys and a trailing newline."""

    path = Path(path)
    if isinstance(payload, BaseModel):
        payload = payload.model_dump(mode="json")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as e:
        raise StorageError(f"cannot write {path}: {e}")


def read_model(path, model: type[Model], error: type[ValidationError] = ValidationError) -> Model:
    """
    load and validate a JSON document.

    raises:
        StorageError: if the file cannot be read
        error: if the document fails validation
    """

    payload = read_json(path)
    try:
        return model.model_validate(payload)
    except PydanticValidationError as e:
        raise error(f"{path}: {e}")
