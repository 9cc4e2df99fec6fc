"""Dataset ingestion: directory layout `root/images/*.png` + `root/masks/*.png`
with matching stems, everything zero-padded to a square canvas."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import DataError
from .pngio import load_image, load_mask
from .rasters import BinaryMask, ImageBuffer, zero_pad, zero_pad_mask

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")


@dataclass(frozen=True)
class DatasetRecord:
    image_id: str
    image_path: Path
    mask_path: Path | None
    image: ImageBuffer
    gt: BinaryMask | None


@dataclass(frozen=True)
class DatasetIndex:
    records: tuple[DatasetRecord, ...]
    canvas: int

    def ids(self) -> list[str]:
        return [r.image_id for r in self.records]

    def get(self, image_id: str) -> DatasetRecord:
        for r in self.records:
            if r.image_id == image_id:
                return r
        raise KeyError(image_id)

    def __len__(self) -> int:
        return len(self.records)

    def all_have_gt(self) -> bool:
        return all(r.gt is not None for r in self.records)


def _listing(directory: Path) -> dict[str, Path]:
    files: dict[str, Path] = {}
    for path in sorted(directory.iterdir()):
        if path.suffix.lower() not in IMAGE_EXTENSIONS or not path.is_file():
            continue
        if path.stem in files:
            raise DataError(f"duplicate image id {path.stem!r}: {files[path.stem]} and {path}")
        files[path.stem] = path
    return files


def list_ids(root) -> list[str]:
    """Sorted image ids under root/images, without loading pixel data."""
    images_dir = Path(root) / "images"
    if not images_dir.is_dir():
        raise DataError(f"dataset has no images directory at {images_dir}")
    return sorted(_listing(images_dir))


def ingest(root, canvas: int) -> DatasetIndex:
    """Load every image (and its mask, when present), padded to canvas x canvas.

    Masks are binarised at 8-bit intensity >= 128 before padding. A mask whose
    dimensions differ from its image's is an error; so is an image larger than
    the canvas.
    """
    root = Path(root)
    images_dir = root / "images"
    masks_dir = root / "masks"
    if not images_dir.is_dir():
        raise DataError(f"dataset has no images directory at {images_dir}")
    image_files = _listing(images_dir)
    mask_files = _listing(masks_dir) if masks_dir.is_dir() else {}

    records = []
    for image_id in sorted(image_files):
        image_path = image_files[image_id]
        image = load_image(image_path)
        mask_path = mask_files.get(image_id)
        gt = None
        if mask_path is not None:
            gt = load_mask(mask_path)
            if (gt.height, gt.width) != (image.height, image.width):
                raise DataError(
                    f"id {image_id!r}: mask {mask_path} is {gt.height}x{gt.width} but "
                    f"image is {image.height}x{image.width}"
                )
        try:
            image = zero_pad(image, canvas, canvas)
            if gt is not None:
                gt = zero_pad_mask(gt, canvas, canvas)
        except ValueError as exc:
            raise DataError(f"id {image_id!r}: {exc}") from exc
        records.append(DatasetRecord(image_id, image_path, mask_path, image, gt))
    return DatasetIndex(tuple(records), canvas)
