"""Voxel adjacency definitions for connected-component labeling."""

from enum import Enum


class Connectivity(int, Enum):
    """Voxel neighbourhoods in 3D

    The value is the neighbour count; `rank` is the argument scipy's
    `generate_binary_structure(3, rank)` needs for the same neighbourhood.
    """

    FACE = 6
    EDGE = 18
    VERTEX = 26

    @property
    def rank(self) -> int:
        """Structuring element connectivity rank for scipy.ndimage."""
        return {Connectivity.FACE: 1, Connectivity.EDGE: 2, Connectivity.VERTEX: 3}[self]

    @classmethod
    def get_supported_values(cls) -> list[int]:
        """All supported neighbour counts."""
        return [member.value for member in cls]

    @classmethod
    def from_value(cls, value: int) -> "Connectivity":
        """Type-safe creation with a clear error."""
        try:
            return cls(int(value))
        except ValueError as e:
            supported = ', '.join(str(v) for v in cls.get_supported_values())
            raise ValueError(f"Unsupported connectivity '{value}'. Supported: {supported}") from e
