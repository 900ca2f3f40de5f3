"""Shared exception types.

InvalidArgument covers contract violations by the caller (bad bands, shape
mismatches, out-of-range markers); InvalidData covers inputs that parse but
carry unusable values (NaN/Inf, single-class labels).
"""


class NeurovoxelError(Exception):
    pass


class InvalidArgument(NeurovoxelError, ValueError):
    pass


class InvalidData(NeurovoxelError, ValueError):
    pass
