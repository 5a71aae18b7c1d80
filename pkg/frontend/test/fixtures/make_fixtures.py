#!/usr/bin/env python3
"""Regenerate the committed PNG fixtures and their expected-RGB sidecars.

Run from this directory: python3 make_fixtures.py

Pillow serves as the independent encoder; the .expected.json sidecars hold
the RGB bytes a decoder should produce, with alpha composited over white.
"""

import json
import pathlib

import numpy as np
from PIL import Image

HERE = pathlib.Path(__file__).parent


def expected_from(img: Image.Image) -> dict:
    if img.mode in ("RGBA", "LA"):
        rgba = img.convert("RGBA")
        white = Image.new("RGBA", rgba.size, (255, 255, 255, 255))
        rgb = Image.alpha_composite(white, rgba).convert("RGB")
    else:
        rgb = img.convert("RGB")
    arr = np.asarray(rgb, dtype=np.uint8)
    return {
        "width": rgb.width,
        "height": rgb.height,
        "rgb": arr.reshape(-1).tolist(),
    }


def emit(name: str, img: Image.Image, **save_kwargs) -> None:
    img.save(HERE / f"{name}.png", **save_kwargs)
    reread = Image.open(HERE / f"{name}.png")
    (HERE / f"{name}.expected.json").write_text(json.dumps(expected_from(reread)))
    print(f"{name}.png: {img.mode} {img.size}")


def main() -> None:
    rng = np.random.default_rng(4242)

    gray = (rng.integers(0, 256, size=(7, 13))).astype(np.uint8)
    emit("gray8", Image.fromarray(gray, mode="L"))

    rgb = rng.integers(0, 256, size=(11, 16, 3)).astype(np.uint8)
    emit("rgb", Image.fromarray(rgb, mode="RGB"))

    # few distinct colors so Pillow writes a palette (color type 3)
    quantized = (rng.integers(0, 5, size=(9, 9, 3)) * 60).astype(np.uint8)
    pal = Image.fromarray(quantized, mode="RGB").convert(
        "P", palette=Image.Palette.ADAPTIVE, colors=8
    )
    emit("palette", pal)

    rgba = rng.integers(0, 256, size=(10, 12, 4)).astype(np.uint8)
    emit("rgba", Image.fromarray(rgba, mode="RGBA"))

    la = rng.integers(0, 256, size=(8, 6, 2)).astype(np.uint8)
    emit("graya", Image.fromarray(la, mode="LA"))

    wide = rng.integers(0, 65536, size=(5, 5)).astype(np.uint16)
    Image.fromarray(wide, mode="I;16").save(HERE / "gray16.png")
    print("gray16.png: I;16 (5, 5), expected to be rejected")

    # structured scene for extract tests: gradients, a disc, an edge
    h, w = 64, 96
    yy, xx = np.mgrid[0:h, 0:w]
    r = (xx / (w - 1) * 255).astype(np.uint8)
    g = (yy / (h - 1) * 255).astype(np.uint8)
    b = np.full((h, w), 40, dtype=np.uint8)
    disc = (yy - 24) ** 2 + (xx - 30) ** 2 < 14**2
    r[disc], g[disc], b[disc] = 230, 40, 25
    b[:, 60:] = 200
    emit("photo", Image.fromarray(np.stack([r, g, b], axis=-1), mode="RGB"))

    scene2 = np.stack([g, b, r], axis=-1)
    emit("photo2", Image.fromarray(scene2, mode="RGB"))


if __name__ == "__main__":
    main()
