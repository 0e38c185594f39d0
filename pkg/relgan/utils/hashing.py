from typing import Any, Iterable
import hashlib
import json

import numpy as np
from torch import Tensor


def get_md5_hash(object: Any) -> str:
    """
    MD5 hash of any JSON-serializable object.
    The object is converted to a JSON string with sorted keys before being hashed,
    which allows for nested dictionaries/lists.
    """
    dhash = hashlib.md5()
    encoded = json.dumps(object, sort_keys=True, default=str).encode()
    dhash.update(encoded)
    return dhash.hexdigest()


def tensor_checksum(tensors: Iterable[Tensor]) -> str:
    """
    MD5 hash over the raw little-endian bytes of a sequence of tensors, in order.
    Two parameter sets have the same checksum iff they are bit-identical.
    """
    dhash = hashlib.md5()
    for t in tensors:
        array = t.detach().cpu().contiguous().numpy()
        dhash.update(str(tuple(array.shape)).encode())
        dhash.update(np.ascontiguousarray(array, dtype=array.dtype.newbyteorder("<")).tobytes())
    return dhash.hexdigest()
