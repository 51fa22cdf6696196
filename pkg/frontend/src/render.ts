// Frame presentation: nearest-neighbor pixel doubling of the server's
// grayscale bytes.  Pure pixel math lives here so it is testable without a
// canvas; main.ts blits the result.

export interface RgbaImage {
  width: number;
  height: number;
  pixels: Uint8ClampedArray<ArrayBuffer>; // RGBA
}

export function frameToRgba(
  gray: Uint8Array,
  width: number,
  height: number,
  scale = 2,
): RgbaImage {
  if (gray.length !== width * height) {
    throw new Error(`frame byte count ${gray.length} != ${width}x${height}`);
  }
  if (scale < 1 || !Number.isInteger(scale)) {
    throw new Error("scale must be a positive integer");
  }
  const outW = width * scale;
  const outH = height * scale;
  const pixels = new Uint8ClampedArray(outW * outH * 4);
  for (let y = 0; y < outH; y++) {
    const srcRow = Math.floor(y / scale) * width;
    for (let x = 0; x < outW; x++) {
      const v = gray[srcRow + Math.floor(x / scale)];
      const o = (y * outW + x) * 4;
      pixels[o] = v;
      pixels[o + 1] = v;
      pixels[o + 2] = v;
      pixels[o + 3] = 255;
    }
  }
  return { width: outW, height: outH, pixels };
}
