"""
`map`: export the viraliency map of one image.

Writes the heatmap PNG at --out, the raw (unnormalised) map next to it as
<out stem>.csv and, for every --channels entry, the channel's support mask as
<out stem>_support_<l>.png at feature resolution.
"""
import argparse
from pathlib import Path
from typing import List, Optional

import numpy as np

from viraliency.core.exceptions import ShapeMismatchError
from viraliency.core.logging import get_run_logger
from viraliency.schemas.model import PoolingMode
from viraliency.services import image_io
from viraliency.services.activation_maps import activation_map, normalize_map, support_masks
from viraliency.services.checkpoint import load_checkpoint
from viraliency.services.csv_io import write_matrix_csv
from viraliency.services.heatmap import colormap_hash, render_heatmap
from viraliency.services.pooling import EtaVector, lena_forward
from viraliency.services.siamese import ETA_KEY

logger = get_run_logger(__name__)


def _channel_list(raw: str) -> List[int]:
    try:
        return [int(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated channel indices, got {raw!r}")


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "map",
        help="Export a viraliency (class activation) map",
        description="Render the class activation map of one image as a heatmap PNG plus raw CSV.",
    )
    parser.add_argument("--checkpoint", required=True, help="Trained checkpoint")
    parser.add_argument("--image", required=True, help="Input image (PNG or PPM)")
    parser.add_argument(
        "--mode",
        choices=[mode.value for mode in PoolingMode],
        default=None,
        help="Support sets to use (default: the checkpoint's pooling mode)",
    )
    parser.add_argument("--class-index", type=int, default=0, help="Output class k (default: 0)")
    parser.add_argument("--side-maps", default=None, help="Side maps .npy for objectness models")
    parser.add_argument("--out", required=True, help="Heatmap PNG path")
    parser.add_argument("--no-overlay", action="store_true", help="Do not blend over the input image")
    parser.add_argument(
        "--channels",
        type=_channel_list,
        default=[],
        help="Comma-separated channels whose support masks are exported",
    )
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    model = load_checkpoint(args.checkpoint)
    mode = PoolingMode(args.mode) if args.mode else model.config.pooling_mode
    image = image_io.load_image(args.image)
    side: Optional[np.ndarray] = image_io.load_side_maps(args.side_maps) if args.side_maps else None

    features = model.features(image, side)[0]
    stored_etas = EtaVector(model.params[ETA_KEY])
    vmap = activation_map(features, model.head_params(), args.class_index, etas=stored_etas, mode=mode)
    map01 = normalize_map(vmap)

    out = Path(args.out)
    pixels = render_heatmap(map01, image=None if args.no_overlay else image, target_size=image.shape[1:])
    image_io.save_rgb(out, pixels)
    raw_csv = write_matrix_csv(out.with_suffix(".csv"), vmap.values)

    if args.channels:
        masks = support_masks(lena_forward(features, vmap.etas_used))
        for channel in args.channels:
            if not 0 <= channel < masks.shape[0]:
                raise ShapeMismatchError("support channel", f"0..{masks.shape[0] - 1}", channel)
            image_io.save_mask(out.with_name(f"{out.stem}_support_{channel}.png"), masks[channel])

    logger.info(
        "Viraliency map written",
        out=str(out),
        raw=str(raw_csv),
        mode=mode.value,
        class_index=args.class_index,
        map_size=f"{vmap.height}x{vmap.width}",
        colormap_sha256=colormap_hash()[:12],
        support_masks=len(args.channels),
    )
    return 0
