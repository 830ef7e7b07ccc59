// Prediction view: histogram of bootstrap estimates with summary
// markers, an optional baseline band from the empty-scenario run, and
// A/B overlay of pinned runs. All statistics come from the server
// response; the client only scales bar heights for display.

import type { PinnedRun } from "../state.js";
import type { DistributionJson, InfeasibilityDetail } from "../types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function formatNumber(v: number, digits = 4): string {
  if (!Number.isFinite(v)) return "–";
  return Number(v.toPrecision(digits)).toString();
}

function histogramBars(dist: DistributionJson, series: string): string {
  const counts = dist.histogram.counts;
  const edges = dist.histogram.edges;
  const peak = Math.max(1, ...counts);
  const bars = counts
    .map((count, i) => {
      const height = Math.round((100 * count) / peak);
      const title = `[${formatNumber(edges[i])}, ${formatNumber(edges[i + 1])}): ${count}`;
      return `<div class="bar" data-series="${series}" style="height:${height}%" title="${title}"></div>`;
    })
    .join("");
  return `<div class="histogram" data-series="${series}">${bars}</div>`;
}

function summaryPanel(dist: DistributionJson): string {
  const s = dist.summary;
  const rows = (["mean", "median", "sd", "q05", "q95"] as const)
    .map((k) => `<tr><th>${k}</th><td data-stat="${k}">${formatNumber(s[k])}</td></tr>`)
    .join("");
  const badge =
    dist.infeasible_fraction > 0
      ? `<span class="badge infeasible-fraction">` +
        `${(100 * dist.infeasible_fraction).toFixed(1)}% of resamples infeasible</span>`
      : "";
  const warnings = dist.warnings
    .map((w) => `<p class="warning">${escapeHtml(w)}</p>`)
    .join("");
  return `<table class="summary">${rows}</table>${badge}${warnings}`;
}

export interface PredictionOptions {
  baseline?: DistributionJson; // empty-scenario run, drawn as a band
  pinned?: PinnedRun[]; // overlaid for A/B comparison
  observedValue?: number; // reference line, e.g. a known true value
}

export function renderPredictionView(
  dist: DistributionJson,
  opts: PredictionOptions = {},
): string {
  const parts: string[] = [`<section class="prediction-view" data-metric="${escapeHtml(dist.metric)}">`];
  parts.push(`<h2>${escapeHtml(dist.metric)}</h2>`);
  if (opts.baseline) {
    const b = opts.baseline.summary;
    parts.push(
      `<div class="baseline-band" data-q05="${b.q05}" data-q95="${b.q95}">` +
        `baseline ${formatNumber(b.mean)} [${formatNumber(b.q05)}, ${formatNumber(b.q95)}]</div>`,
    );
  }
  parts.push(histogramBars(dist, "current"));
  for (const pin of opts.pinned ?? []) {
    const d = pin.response.distributions[dist.metric];
    if (!d) continue;
    parts.push(
      `<div class="pin-overlay" data-pin="${escapeHtml(pin.name)}" ` +
        `data-key="${pin.key.scenarioHash}:${pin.key.seed}">` +
        histogramBars(d, `pin-${pin.name}`) +
        `<span class="pin-label">${escapeHtml(pin.name)}: median ${formatNumber(d.summary.median)}</span>` +
        `</div>`,
    );
  }
  if (opts.observedValue !== undefined) {
    parts.push(
      `<div class="observed-line" data-value="${opts.observedValue}">observed ${formatNumber(opts.observedValue)}</div>`,
    );
  }
  const s = dist.summary;
  parts.push(
    `<div class="markers" data-median="${s.median}" data-q05="${s.q05}" data-q95="${s.q95}"></div>`,
  );
  parts.push(summaryPanel(dist));
  parts.push("</section>");
  return parts.join("\n");
}

/** Card shown instead of the histogram when the service answers 422. */
export function renderInfeasibilityCard(detail: InfeasibilityDetail): string {
  const labels = detail.offending_labels
    .map((l) => `<li class="offending-label">${escapeHtml(l)}</li>`)
    .join("");
  return (
    `<section class="infeasibility-card">` +
    `<h2>Scenario is infeasible</h2>` +
    `<p class="evidence">evidence: ${escapeHtml(detail.evidence)}</p>` +
    `<ul>${labels}</ul>` +
    `<p class="message">${escapeHtml(detail.message)}</p>` +
    `<p class="hint">Relax or remove one of the constraints above and re-run.</p>` +
    `</section>`
  );
}
