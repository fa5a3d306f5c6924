from .params import (
    ParamVector,
    UpdateVector,
    apply_global_update,
    as_float64,
    check_finite,
)
from .slab import OverwriteTrace, ReadRecord, SharedSlab, WriteRecord, make_update_vector

__all__ = [
    "ParamVector",
    "UpdateVector",
    "apply_global_update",
    "as_float64",
    "check_finite",
    "OverwriteTrace",
    "ReadRecord",
    "SharedSlab",
    "WriteRecord",
    "make_update_vector",
]
