"""
Model checkpoints: one float64 tensor container per parameter plus a JSON index.
"""
import json
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from loguru import logger

from modedg.data.storage import read_tensor, write_tensor
from modedg.utils.errors import DatasetFormatError

from .cnn import ConvNet, ModelConfig

INDEX_NAME = "index.json"
F64_CODE = 3


def save_checkpoint(
    model: ConvNet,
    path: Union[str, Path],
    epoch: int = 0,
    extra: Optional[Dict[str, Any]] = None
) -> Path:
    """
    Write a checkpoint directory.

    Args:
        model: Model to store
        path: Target directory (created if needed)
        epoch: Epochs completed
        extra: Additional JSON-serializable index entries

    Returns:
        The checkpoint directory
    """
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    params = {}
    for name, param in model.params.items():
        filename = f"{name}.mdts"
        write_tensor(root / filename, param.data, code=F64_CODE)
        params[name] = {'file': filename, 'shape': list(param.shape)}
    index = {
        'params': params,
        'config': model.config.to_dict(),
        'epoch': epoch,
        'checksum': model.checksum(),
    }
    if extra:
        index.update(extra)
    with open(root / INDEX_NAME, 'w', encoding='utf-8') as f:
        json.dump(index, f, indent=2)
    logger.info(f"Checkpoint written to {root} (epoch {epoch})")
    return root


def load_checkpoint(path: Union[str, Path]) -> Tuple[ConvNet, Dict[str, Any]]:
    """
    Rebuild a model from a checkpoint directory.

    Returns:
        The model and the parsed index

    Raises:
        DatasetFormatError: If the index is inconsistent with the tensors
    """
    root = Path(path)
    with open(root / INDEX_NAME, 'r', encoding='utf-8') as f:
        index = json.load(f)
    for key in ('params', 'config'):
        if key not in index:
            raise DatasetFormatError("checkpoint index is missing a field", field=key)

    model = ConvNet(ModelConfig.from_dict(index['config']))
    state = {}
    for name, entry in index['params'].items():
        values = read_tensor(root / entry['file'])
        if list(values.shape) != list(entry['shape']):
            raise DatasetFormatError(f"{entry['file']} has shape {values.shape}", field="shape")
        state[name] = values
    model.load_state_dict(state)
    return model, index
