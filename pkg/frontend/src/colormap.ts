/** Affordance-score colormap and score-ranking helpers.
 *
 * The map is a piecewise-linear walk through inferno anchor colors
 * (perceptually uniform lineage): score 0 renders cool/dark, score 1
 * renders hot/bright. */

export type Rgb = [number, number, number];

const ANCHORS: Rgb[] = [
  [0, 0, 4], // 0.0
  [40, 11, 84], // 0.125
  [101, 21, 110], // 0.25
  [159, 42, 99], // 0.375
  [212, 72, 66], // 0.5
  [245, 125, 21], // 0.625
  [250, 193, 39], // 0.75
  [245, 235, 97], // 0.875
  [252, 255, 164], // 1.0
];

function clamp01(x: number): number {
  if (Number.isNaN(x)) return 0;
  return Math.min(1, Math.max(0, x));
}

export function scoreColor(score: number): Rgb {
  const t = clamp01(score) * (ANCHORS.length - 1);
  const i = Math.min(ANCHORS.length - 2, Math.floor(t));
  const f = t - i;
  const a = ANCHORS[i];
  const b = ANCHORS[i + 1];
  return [
    Math.round(a[0] + (b[0] - a[0]) * f),
    Math.round(a[1] + (b[1] - a[1]) * f),
    Math.round(a[2] + (b[2] - a[2]) * f),
  ];
}

export function scoreColorCss(score: number): string {
  const [r, g, b] = scoreColor(score);
  return `rgb(${r},${g},${b})`;
}

/** Perceived heat of a color on this map: monotone in the score, so color
 * comparisons can stand in for score comparisons in display checks. */
export function heat(color: Rgb): number {
  // luminance rises monotonically along the anchor walk
  return 0.2126 * color[0] + 0.7152 * color[1] + 0.0722 * color[2];
}

/** Indices of the top decile (ceil(n/10)) by score, ties broken toward the
 * lower index so the selection is deterministic. */
export function topDecileIndices(scores: number[]): number[] {
  const k = Math.max(1, Math.ceil(scores.length / 10));
  return scores
    .map((score, index) => ({ score, index }))
    .sort((a, b) => b.score - a.score || a.index - b.index)
    .slice(0, k)
    .map((e) => e.index)
    .sort((a, b) => a - b);
}
