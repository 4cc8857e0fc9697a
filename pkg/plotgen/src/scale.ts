// Axis scales and tick helpers. All formatting is deterministic: the same
// domain always yields the same tick labels, character for character.

export interface Scale {
  (value: number): number;
  domain: [number, number];
  range: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0;
  const scale = ((value: number) =>
    span === 0 ? (r0 + r1) / 2 : r0 + ((value - d0) / span) * (r1 - r0)) as Scale;
  scale.domain = domain;
  scale.range = range;
  return scale;
}

export function log2Scale(domain: [number, number], range: [number, number]): Scale {
  if (domain[0] <= 0) {
    throw new Error(`log axis needs positive values, domain starts at ${domain[0]}`);
  }
  const inner = linearScale([Math.log2(domain[0]), Math.log2(domain[1])], range);
  const scale = ((value: number) => inner(Math.log2(value))) as Scale;
  scale.domain = domain;
  scale.range = range;
  return scale;
}

/** Expand [lo, hi] to round multiples of a 1/2/5 step and list the ticks. */
export function niceTicks(lo: number, hi: number, target = 5): { lo: number; hi: number; ticks: number[] } {
  if (lo === hi) {
    const pad = lo === 0 ? 1 : Math.abs(lo) / 2;
    lo -= pad;
    hi += pad;
  }
  const rawStep = (hi - lo) / target;
  const mag = Math.pow(10, Math.floor(Math.log10(rawStep)));
  let step = mag;
  for (const m of [1, 2, 5, 10]) {
    step = m * mag;
    if (step >= rawStep) break;
  }
  const niceLo = Math.floor(lo / step) * step;
  const niceHi = Math.ceil(hi / step) * step;
  const ticks: number[] = [];
  // count via rounding: accumulating niceLo + i*step drifts in float
  const count = Math.round((niceHi - niceLo) / step);
  for (let i = 0; i <= count; i++) {
    ticks.push(niceLo + i * step);
  }
  return { lo: niceLo, hi: niceHi, ticks };
}

/** Label a tick with just enough decimals for its step. */
export function tickLabel(value: number, step: number): string {
  const decimals = Math.max(0, -Math.floor(Math.log10(step) + 1e-9));
  const text = value.toFixed(Math.min(decimals, 10));
  return text === "-0" || /^-0\.0+$/.test(text) ? text.slice(1) : text;
}
