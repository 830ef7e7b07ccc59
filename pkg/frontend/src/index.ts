// Browser entry point: wires the scenario editor, the three views, and
// A/B pinning against a running scenario-analysis service. All logic
// lives in the imported modules so it stays testable without a DOM.

import { ApiClient, RequestGate, runKey } from "./api.js";
import { toScenarioJson, validateDraft, type ScenarioDraft } from "./scenario.js";
import { ViewState } from "./state.js";
import {
  renderInfeasibilityCard,
  renderPredictionView,
} from "./views/prediction.js";
import { renderGridView } from "./views/grid.js";
import { weightsViewFromSolve } from "./views/weights.js";
import { ApiError, type BootstrapResponse } from "./types.js";

export class App {
  private readonly bootstrapGate = new RequestGate<BootstrapResponse>();
  readonly state = new ViewState();
  private baseline: BootstrapResponse | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly mount: {
      prediction: (html: string) => void;
      weights: (html: string) => void;
      grid: (html: string) => void;
      problems: (messages: string[]) => void;
    },
  ) {}

  /** Runs the draft; resolves false when superseded by a newer submission. */
  async run(draft: ScenarioDraft, metric: string, observedValue?: number): Promise<boolean> {
    const problems = validateDraft(draft);
    if (problems.length > 0) {
      this.mount.problems(problems.map((p) => p.message));
      return false;
    }
    const scenario = toScenarioJson(draft);
    const key = runKey(scenario, draft.seed);
    try {
      const resp = await this.bootstrapGate.submit(key, (signal) =>
        this.api.bootstrap(
          draft.datasetId,
          scenario,
          { B: draft.B, m: draft.m, seed: draft.seed },
          signal,
        ),
      );
      if (resp === null) return false; // stale
      this.state.bootstrap = resp;
      this.mount.prediction(
        renderPredictionView(resp.distributions[metric], {
          baseline: this.baseline?.distributions[metric],
          pinned: [...this.state.pinned()],
          observedValue,
        }),
      );
      const solved = await this.api.solve(draft.datasetId, scenario, draft.seed);
      this.state.solve = solved;
      this.mount.weights(weightsViewFromSolve(solved));
      return true;
    } catch (err) {
      if (err instanceof ApiError) {
        const detail = err.infeasibility();
        if (detail) {
          this.mount.prediction(renderInfeasibilityCard(detail));
          return false;
        }
      }
      throw err;
    }
  }

  async loadBaseline(draft: ScenarioDraft): Promise<void> {
    this.baseline = await this.api.bootstrap(
      draft.datasetId,
      { constraints: [] },
      { B: draft.B, m: draft.m, seed: draft.seed },
    );
  }

  pin(name: string, draft: ScenarioDraft): void {
    if (this.state.bootstrap === null) return;
    this.state.pin(name, toScenarioJson(draft), draft.seed, this.state.bootstrap);
  }

  async runSweep(
    draft: ScenarioDraft,
    axes: { feature: string; grid: number[]; mode?: string }[],
    metric: string,
    level?: number,
  ): Promise<void> {
    const resp = await this.api.sweep(draft.datasetId, axes, {
      B: draft.B,
      seed: draft.seed,
      metric,
      level,
    });
    this.state.sweep = resp;
    this.mount.grid(renderGridView(resp));
  }
}

declare const document: { getElementById(id: string): { innerHTML: string } | null } | undefined;

export function mountInBrowser(baseUrl: string): App | null {
  if (typeof document === "undefined") return null;
  const target = (id: string) => (html: string) => {
    const el = document!.getElementById(id);
    if (el) el.innerHTML = html;
  };
  return new App(new ApiClient(baseUrl), {
    prediction: target("prediction"),
    weights: target("weights"),
    grid: target("grid"),
    problems: (msgs) => target("problems")(msgs.map((m) => `<li>${m}</li>`).join("")),
  });
}
