// Weights view: relative-weight boxplot and reliability gauges. The box
// geometry and every gauge value are taken verbatim from the server's
// diagnostics payload; nothing is recomputed client-side.

import type { BoxplotJson, SolveResponse, WeightDiagnosticsJson } from "../types.js";
import { escapeHtml, formatNumber } from "./prediction.js";

export function renderBoxplot(box: BoxplotJson): string {
  const outliers = box.outliers
    .map((v) => `<span class="outlier" data-value="${v}">${formatNumber(v)}</span>`)
    .join("");
  return (
    `<div class="boxplot" data-label="${escapeHtml(box.label)}" ` +
    `data-q1="${box.q1}" data-median="${box.median}" data-q3="${box.q3}" ` +
    `data-whisker-low="${box.whisker_low}" data-whisker-high="${box.whisker_high}">` +
    `<span class="box-label">${escapeHtml(box.label)}</span>${outliers}</div>`
  );
}

function gauge(name: string, ratio: number): string {
  const pct = Math.max(0, Math.min(100, 100 * ratio));
  return (
    `<div class="gauge" data-name="${name}" data-value="${ratio}">` +
    `<span class="gauge-fill" style="width:${pct.toFixed(1)}%"></span>` +
    `<span class="gauge-text">${name} ${pct.toFixed(1)}%</span></div>`
  );
}

export interface WeightsViewInput {
  status: string;
  diagnostics: WeightDiagnosticsJson | null;
  boxplots?: BoxplotJson[]; // e.g. spread-curve boxes, ordered by multiple
}

export function renderWeightsView(input: WeightsViewInput): string {
  if (input.status !== "converged" || input.diagnostics === null) {
    // no gauges for a failed solve: the numbers would be meaningless
    return (
      `<section class="weights-view">` +
      `<div class="status-banner" data-status="${escapeHtml(input.status)}">` +
      `solver status: ${escapeHtml(input.status)}</div></section>`
    );
  }
  const d = input.diagnostics;
  const parts: string[] = [`<section class="weights-view">`];
  parts.push(gauge("ess-ratio", d.ess_ratio));
  parts.push(gauge("entropy-ratio", d.entropy_ratio));
  parts.push(
    `<div class="outliers" data-count="${d.outlier_count}" data-threshold="${d.threshold}">` +
      `${d.outlier_count} weight(s) above ${formatNumber(d.threshold)}x</div>`,
  );
  parts.push(
    `<table class="weight-quantiles">` +
      Object.entries(d.quantiles)
        .map(([q, v]) => `<tr><th>p${q}</th><td>${formatNumber(v)}</td></tr>`)
        .join("") +
      `</table>`,
  );
  for (const box of input.boxplots ?? []) {
    parts.push(renderBoxplot(box));
  }
  for (const w of d.warnings) {
    parts.push(`<p class="warning">${escapeHtml(w)}</p>`);
  }
  parts.push("</section>");
  return parts.join("\n");
}

export function weightsViewFromSolve(resp: SolveResponse): string {
  return renderWeightsView({ status: resp.status, diagnostics: resp.diagnostics });
}
