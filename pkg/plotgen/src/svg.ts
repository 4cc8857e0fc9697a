// Minimal SVG string builder. No DOM, no dependencies: figures must render
// byte-identical on every run, so coordinates go through one fixed format.

export type Attrs = Record<string, string | number>;

/** Two decimals, always. 1 -> "1.00" keeps output stable across inputs. */
export function px(value: number): string {
  if (!Number.isFinite(value)) {
    throw new Error(`non-finite coordinate: ${value}`);
  }
  const text = value.toFixed(2);
  return text === "-0.00" ? "0.00" : text;
}

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function tag(name: string, attrs: Attrs, ...children: string[]): string {
  const parts = Object.entries(attrs).map(
    ([k, v]) => ` ${k}="${typeof v === "number" ? px(v) : esc(v)}"`,
  );
  const open = `<${name}${parts.join("")}`;
  if (children.length === 0) return `${open}/>`;
  return `${open}>${children.join("")}</${name}>`;
}

export function text(x: number, y: number, content: string, attrs: Attrs = {}): string {
  return tag("text", { x: px(x), y: px(y), ...attrs }, esc(content));
}

export function line(x1: number, y1: number, x2: number, y2: number, attrs: Attrs): string {
  return tag("line", { x1: px(x1), y1: px(y1), x2: px(x2), y2: px(y2), ...attrs });
}

export function rect(x: number, y: number, w: number, h: number, attrs: Attrs): string {
  return tag("rect", { x: px(x), y: px(y), width: px(w), height: px(h), ...attrs });
}

export function circle(cx: number, cy: number, r: number, attrs: Attrs): string {
  return tag("circle", { cx: px(cx), cy: px(cy), r: px(r), ...attrs });
}

export function polyline(points: Array<[number, number]>, attrs: Attrs): string {
  const joined = points.map(([x, y]) => `${px(x)},${px(y)}`).join(" ");
  return tag("polyline", { points: joined, fill: "none", ...attrs });
}

export function svgRoot(width: number, height: number, body: string[]): string {
  const open = tag("svg", {
    xmlns: "http://www.w3.org/2000/svg",
    width: String(width),
    height: String(height),
    viewBox: `0 0 ${width} ${height}`,
  }).replace("/>", ">");
  return `${open}\n${body.join("\n")}\n</svg>\n`;
}
