#!/usr/bin/env python3
"""Decodes the top mip of a BC6H DDS file with Pillow (an independent BC6H
implementation) and writes "<width> <height>\\n" followed by 8-bit RGB bytes.

    python3 tools/pil_decode_dds.py layer0.dds out.rgb
"""

import sys

from PIL import Image


def main() -> int:
    src, dst = sys.argv[1], sys.argv[2]
    with Image.open(src) as im:
        im.load()
        rgb = im.convert("RGB")
        with open(dst, "wb") as f:
            f.write(f"{rgb.width} {rgb.height}\n".encode())
            f.write(rgb.tobytes())
    return 0


if __name__ == "__main__":
    sys.exit(main())
