// Fixed default style so identical CSVs render byte-identical SVGs.
// Any field can be overridden from a JSON file via --style.

import { readFileSync } from "node:fs";

export interface Style {
  width: number;
  height: number;
  margin: { l: number; r: number; t: number; b: number };
  fontFamily: string;
  fontSize: number;
  titleSize: number;
  background: string;
  axisColor: string;
  gridColor: string;
  textColor: string;
  /** Series colors, assigned in order of first appearance. */
  palette: string[];
  markerRadius: number;
  lineWidth: number;
  errorCapWidth: number;
  bandFill: string;
  bandOpacity: number;
  histOpacity: number;
}

export const DEFAULT_STYLE: Style = {
  width: 640,
  height: 420,
  margin: { l: 62, r: 18, t: 34, b: 48 },
  fontFamily: "Helvetica, Arial, sans-serif",
  fontSize: 12,
  titleSize: 14,
  background: "#ffffff",
  axisColor: "#333333",
  gridColor: "#dddddd",
  textColor: "#222222",
  palette: ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"],
  markerRadius: 3,
  lineWidth: 1.5,
  errorCapWidth: 6,
  bandFill: "#bbbbbb",
  bandOpacity: 0.35,
  histOpacity: 0.65,
};

/** Load style overrides from a JSON file on top of the defaults. */
export function loadStyle(path?: string): Style {
  const style: Style = structuredClone(DEFAULT_STYLE);
  if (!path) return style;
  const overrides = JSON.parse(readFileSync(path, "utf8")) as Record<string, unknown>;
  for (const key of Object.keys(overrides)) {
    if (!(key in style)) {
      throw new Error(`unknown style key ${JSON.stringify(key)}`);
    }
    if (key === "margin") {
      Object.assign(style.margin, overrides[key] as object);
    } else {
      (style as unknown as Record<string, unknown>)[key] = overrides[key];
    }
  }
  return style;
}
