/** False-color rendering of a disparity map (near = warm, far = cool). */

const STOPS: Array<[number, [number, number, number]]> = [
  [0.0, [28, 36, 84]],
  [0.25, [30, 110, 161]],
  [0.5, [45, 178, 125]],
  [0.75, [221, 191, 48]],
  [1.0, [245, 85, 41]],
];

export function colorOfDisparity(d: number): [number, number, number] {
  const v = Math.min(1, Math.max(0, d));
  for (let i = 1; i < STOPS.length; i++) {
    const [t1, c1] = STOPS[i];
    const [t0, c0] = STOPS[i - 1];
    if (v <= t1) {
      const f = (v - t0) / (t1 - t0);
      return [
        Math.round(c0[0] + f * (c1[0] - c0[0])),
        Math.round(c0[1] + f * (c1[1] - c0[1])),
        Math.round(c0[2] + f * (c1[2] - c0[2])),
      ];
    }
  }
  return STOPS[STOPS.length - 1][1];
}

/**
 * Map grayscale disparity pixels (RGBA from a decoded PNG) to false color.
 * Mutates and returns the buffer; alpha controls overlay strength.
 */
export function falseColor(rgba: Uint8ClampedArray, alpha = 168): Uint8ClampedArray {
  for (let i = 0; i < rgba.length; i += 4) {
    const d = rgba[i] / 255; // grayscale: any channel works
    const [r, g, b] = colorOfDisparity(d);
    rgba[i] = r;
    rgba[i + 1] = g;
    rgba[i + 2] = b;
    rgba[i + 3] = alpha;
  }
  return rgba;
}
