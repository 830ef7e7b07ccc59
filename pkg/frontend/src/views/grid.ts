// Grid view: 2-D sweeps render as a heatmap with "median ± sd" cell
// labels, hatching on cells with any infeasible resamples, and an
// optional iso-level contour overlay. 1-D sweeps render as a strip of
// the server-provided boxplots instead.

import type { SweepCellJson, SweepResponse } from "../types.js";
import { escapeHtml, formatNumber } from "./prediction.js";
import { renderBoxplot } from "./weights.js";

function cellColor(median: number, lo: number, hi: number): string {
  // blue (low) to red (high) ramp; a pure display choice
  const t = hi > lo ? (median - lo) / (hi - lo) : 0.5;
  const r = Math.round(40 + 200 * t);
  const b = Math.round(240 - 200 * t);
  return `rgb(${r},80,${b})`;
}

function renderCell(cell: SweepCellJson, lo: number, hi: number): string {
  const hatched = cell.infeasible_fraction > 0 ? " hatched" : "";
  if (cell.summary === null) {
    return (
      `<td class="cell infeasible hatched" data-a="${cell.a_value}" data-b="${cell.b_value}">` +
      `infeasible</td>`
    );
  }
  const median = cell.summary.median;
  const sd = cell.summary.sd;
  return (
    `<td class="cell${hatched}" data-a="${cell.a_value}" data-b="${cell.b_value}" ` +
    `data-median="${median}" data-sd="${sd}" style="background:${cellColor(median, lo, hi)}">` +
    `${formatNumber(median)} &plusmn; ${formatNumber(sd, 2)}</td>`
  );
}

function contourOverlay(contour: { level: number; points: [number, number][] }): string {
  const points = contour.points
    .map(([a, b]) => `<span class="contour-point" data-a="${a}" data-b="${b}"></span>`)
    .join("");
  return (
    `<div class="contour" data-level="${contour.level}">` +
    `level ${formatNumber(contour.level)}: ${points}</div>`
  );
}

export function renderGridView(resp: SweepResponse): string {
  if (resp.axes.length === 1) {
    // 1-D: box strip in grid order
    const boxes = resp.cells
      .map((c) =>
        c.boxplot === null
          ? `<div class="boxplot infeasible" data-label="a=${c.a_value}">infeasible</div>`
          : renderBoxplot(c.boxplot),
      )
      .join("\n");
    return (
      `<section class="grid-view strip" data-metric="${escapeHtml(resp.metric)}">` +
      `${boxes}</section>`
    );
  }

  const medians = resp.cells
    .filter((c) => c.summary !== null)
    .map((c) => (c.summary as Record<string, number>).median);
  if (medians.length === 0) {
    return (
      `<section class="grid-view empty">` +
      `<p class="guidance">Every cell in this grid is infeasible. ` +
      `Shrink the grid toward the baseline (multiplier 1, lift 0) and re-run.</p>` +
      `</section>`
    );
  }
  const lo = Math.min(...medians);
  const hi = Math.max(...medians);
  const [gridA, gridB] = [resp.axes[0].grid, resp.axes[1].grid];
  const byKey = new Map<string, SweepCellJson>();
  for (const cell of resp.cells) {
    byKey.set(`${cell.a_value}|${cell.b_value}`, cell);
  }
  const header =
    `<tr><th></th>` +
    gridB.map((b) => `<th scope="col">${formatNumber(b)}</th>`).join("") +
    `</tr>`;
  const rows = gridA
    .map((a) => {
      const cells = gridB
        .map((b) => renderCell(byKey.get(`${a}|${b}`) as SweepCellJson, lo, hi))
        .join("");
      return `<tr><th scope="row">${formatNumber(a)}</th>${cells}</tr>`;
    })
    .join("\n");
  const parts = [
    `<section class="grid-view heatmap" data-metric="${escapeHtml(resp.metric)}">`,
    `<table class="grid" data-feature-a="${escapeHtml(resp.axes[0].feature)}" ` +
      `data-feature-b="${escapeHtml(resp.axes[1].feature)}">${header}\n${rows}</table>`,
  ];
  if (resp.contour) {
    parts.push(contourOverlay(resp.contour));
  }
  parts.push("</section>");
  return parts.join("\n");
}
