"""Deterministic numeric reference of the PET/CT token encoding path.

PET and CT are cut into non-overlapping patches and projected to d-wide tokens. PET tokens receive
an additive mask embedding, both modalities pass the encoder stub and are concatenated per token.
The focal crops take the same path and are added token-wise to the global tokens. Spatial pooling
and a linear projector produce the language-model tokens.

The encoder stub is a fixed orthogonal matrix and every weight comes from one seeded PCG64 stream, so results
are reproducible across platforms. Tokens are ordered raster-wise over the (D, W, H) token grid.
"""

from dataclasses import dataclass, field

import numpy as np

from ..parameters.models import FusionSpec, PatchSpec
from ..types.errors import IndivisibleDims, IndivisibleTokens, PetGridError, TokenCountMismatch
from .focal_prompt_helper import FocalCrop
from .volume_helper import LesionMask, Volume3D

Dims = tuple[int, int, int]


@dataclass(frozen=True, eq=False)
class TokenMatrix:
    """K x C float64 token matrix over a token grid with prod(grid) == K."""

    data: np.ndarray
    grid: Dims

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        grid = tuple(int(g) for g in self.grid)
        if data.ndim != 2:
            raise PetGridError(f"Token matrix must be 2D, got shape {data.shape}")
        if data.shape[0] != int(np.prod(grid)):
            raise PetGridError(f"Token matrix has {data.shape[0]} rows for token grid {grid}")
        if not np.isfinite(data).all():
            raise PetGridError("Token matrix contains non-finite values")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "grid", grid)

    @property
    def rows(self) -> int:
        return int(self.data.shape[0])

    @property
    def cols(self) -> int:
        return int(self.data.shape[1])


@dataclass(frozen=True, eq=False)
class RefWeights:
    """Seeded stand-ins for the trainable parameters.

    Attributes:
        patch_projections: Patch voxel count -> (P, d) projection shared by PET and CT
        mask_embed_table: (mask_bins + 1, d) table; row 0 (empty patch) is zero
        encoder_stub: Orthogonal (d, d) matrix standing in for the encoder
        projector: (2d, lm_dim) projection applied after pooling
    """

    patch_projections: dict[Dims, np.ndarray]
    mask_embed_table: np.ndarray
    encoder_stub: np.ndarray
    projector: np.ndarray
    seed: int = field(default=0)

    @property
    def embed_dim(self) -> int:
        return int(self.encoder_stub.shape[0])

    @property
    def mask_bins(self) -> int:
        return int(self.mask_embed_table.shape[0] - 1)

    @classmethod
    def generate(
        cls,
        seed: int,
        global_patch: PatchSpec,
        focal_patch: PatchSpec | None = None,
        lm_dim: int = 128,
        mask_bins: int = 16,
    ) -> "RefWeights":
        """Draw all weights from Generator(PCG64(seed)) in a fixed order.

        Projections are drawn per distinct patch size in sorted order, then the mask table, the
        encoder stub (QR with a sign fix) and the projector.
        """
        d = global_patch.embed_dim
        if focal_patch is not None and focal_patch.embed_dim != d:
            raise PetGridError(f"Focal embed_dim {focal_patch.embed_dim} differs from global {d}")
        rng = np.random.Generator(np.random.PCG64(seed))

        sizes = sorted({global_patch.size} | ({focal_patch.size} if focal_patch is not None else set()))
        projections = {}
        for size in sizes:
            voxels = int(np.prod(size))
            projections[size] = rng.standard_normal((voxels, d)) / np.sqrt(voxels)

        table = np.zeros((mask_bins + 1, d))
        table[1:] = rng.standard_normal((mask_bins, d))

        q, r = np.linalg.qr(rng.standard_normal((d, d)))
        q = q * np.where(np.diag(r) < 0, -1.0, 1.0)

        projector = rng.standard_normal((2 * d, lm_dim)) / np.sqrt(2 * d)
        return cls(patch_projections=projections, mask_embed_table=table, encoder_stub=q, projector=projector, seed=seed)

    @classmethod
    def from_fusion_spec(cls, fusion: FusionSpec, global_patch: PatchSpec, focal_patch: PatchSpec) -> "RefWeights":
        return cls.generate(fusion.seed, global_patch, focal_patch, fusion.lm_dim, fusion.mask_bins)

    def projection_for(self, spec: PatchSpec) -> np.ndarray:
        try:
            projection = self.patch_projections[spec.size]
        except KeyError as e:
            raise PetGridError(f"No patch projection for patch size {spec.size}") from e
        if projection.shape[1] != spec.embed_dim:
            raise PetGridError(f"Projection width {projection.shape[1]} differs from embed_dim {spec.embed_dim}")
        return projection

    def table_rows(self, occupancy: np.ndarray) -> np.ndarray:
        """Table row per occupancy: 0 for empty, else max(1, rint(occupancy * mask_bins))."""
        bins = self.mask_bins
        index = np.maximum(1, np.rint(occupancy * bins)).astype(np.int64)
        return np.where(occupancy > 0, np.minimum(index, bins), 0)


def token_grid(dims: Dims, spec: PatchSpec) -> Dims:
    """Token grid of a volume; raises IndivisibleDims unless the patch size tiles dims."""
    size = spec.size
    if any(n % s for n, s in zip(dims, size)):
        raise IndivisibleDims(f"Dims {tuple(dims)} are not divisible by patch size {size}")
    return tuple(n // s for n, s in zip(dims, size))


def focal_dims_for(global_dims: Dims, global_patch: PatchSpec, focal_patch: PatchSpec) -> Dims:
    """Focal dims giving the focal path the same token grid as the global path."""
    grid = token_grid(global_dims, global_patch)
    return tuple(g * s for g, s in zip(grid, focal_patch.size))


def _patches(data: np.ndarray, spec: PatchSpec) -> tuple[np.ndarray, Dims]:
    """(K, P) matrix of flattened patches in raster order."""
    grid = token_grid(data.shape, spec)
    s_d, s_w, s_h = spec.size
    g_d, g_w, g_h = grid
    blocks = (
        np.asarray(data, dtype=np.float64)
        .reshape(g_d, s_d, g_w, s_w, g_h, s_h)
        .transpose(0, 2, 4, 1, 3, 5)
        .reshape(g_d * g_w * g_h, s_d * s_w * s_h)
    )
    return blocks, grid


def patch_embed(v: Volume3D, spec: PatchSpec, w: RefWeights) -> TokenMatrix:
    """Row k = flatten(patch k) @ patch projection.

    Raises:
        IndivisibleDims: If the patch size does not tile the volume
    """
    blocks, grid = _patches(v.data, spec)
    return TokenMatrix(blocks @ w.projection_for(spec), grid)


def mask_embed(m: LesionMask, spec: PatchSpec, w: RefWeights) -> TokenMatrix:
    """Per-patch occupancy fraction looked up in the mask table; empty patches give zero rows."""
    blocks, grid = _patches(m.data, spec)
    occupancy = blocks.mean(axis=1)
    return TokenMatrix(w.mask_embed_table[w.table_rows(occupancy)], grid)


def _encode_branch(
    pet: Volume3D, ct: Volume3D, mask: LesionMask | None, spec: PatchSpec, w: RefWeights, fusion: FusionSpec
) -> TokenMatrix:
    z_pet = patch_embed(pet, spec, w)
    conditioned = z_pet.data
    if fusion.use_mask and mask is not None:
        conditioned = conditioned + mask_embed(mask, spec, w).data
    x_pet = conditioned @ w.encoder_stub
    if fusion.use_ct:
        x_ct = patch_embed(ct, spec, w).data @ w.encoder_stub
    else:
        x_ct = np.zeros_like(x_pet)
    return TokenMatrix(np.concatenate([x_pet, x_ct], axis=1), z_pet.grid)


def encode_fuse(
    pet: Volume3D,
    ct: Volume3D,
    mask: LesionMask | None,
    focal: FocalCrop | None,
    global_spec: PatchSpec,
    focal_spec: PatchSpec,
    w: RefWeights,
    fusion: FusionSpec | None = None,
) -> TokenMatrix:
    """Global tokens [Enc(PET patches + mask embedding) | Enc(CT patches)] plus the same on the focal crop.

    Switching off use_mask, use_ct or use_focal replaces that term with zeros; the column count
    stays 2d.

    Raises:
        IndivisibleDims: If a patch size does not tile its volume
        TokenCountMismatch: If global and focal token matrices differ in shape
    """
    fusion = fusion or FusionSpec()
    x = _encode_branch(pet, ct, mask, global_spec, w, fusion)
    if not fusion.use_focal or focal is None:
        return x
    x_focal = _encode_branch(focal.pet_crop, focal.ct_crop, focal.mask_crop, focal_spec, w, fusion)
    if x_focal.data.shape != x.data.shape:
        raise TokenCountMismatch(
            f"Global tokens {x.data.shape} (grid {x.grid}) vs focal tokens {x_focal.data.shape} (grid {x_focal.grid})"
        )
    return TokenMatrix(x.data + x_focal.data, x.grid)


def spatial_pool(t: TokenMatrix, pool_factor: int) -> TokenMatrix:
    """Mean over each pool_factor^3 block of the token grid."""
    if any(g % pool_factor for g in t.grid):
        raise IndivisibleTokens(f"Token grid {t.grid} is not divisible by pool factor {pool_factor}")
    g_d, g_w, g_h = t.grid
    f = pool_factor
    pooled = t.data.reshape(g_d // f, f, g_w // f, f, g_h // f, f, t.cols).mean(axis=(1, 3, 5))
    grid = (g_d // f, g_w // f, g_h // f)
    return TokenMatrix(pooled.reshape(-1, t.cols), grid)


def pool_project(t: TokenMatrix, w: RefWeights, pool_factor: int) -> TokenMatrix:
    """Spatially pooled tokens times the projector.

    Raises:
        IndivisibleTokens: If the token grid is not divisible by pool_factor
    """
    pooled = spatial_pool(t, pool_factor)
    if pooled.cols != w.projector.shape[0]:
        raise PetGridError(f"Token width {pooled.cols} does not match projector input {w.projector.shape[0]}")
    return TokenMatrix(pooled.data @ w.projector, pooled.grid)
