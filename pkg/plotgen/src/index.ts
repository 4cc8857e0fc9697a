export {
  DataError,
  HIST_SCHEMA,
  SWEEP_SCHEMA,
  SchemaError,
  archLabel,
  parseHistCsv,
  parseSweepCsv,
} from "./csv.js";
export type { HistBin, HistSeries, SweepRow } from "./csv.js";
export { renderAdvantageCurves, renderBiasHistogram, renderStageSweep } from "./charts.js";
export type { Band, FigureOptions } from "./charts.js";
export { DEFAULT_STYLE, loadStyle } from "./style.js";
export type { Style } from "./style.js";
export { run } from "./cli.js";
