// View state: the latest response per view plus pinned runs for A/B
// comparison. Pins are immutable snapshots keyed by (scenario hash, seed)
// so re-running a pinned scenario with its recorded seed reproduces the
// same histogram.

import { runKey, sameKey, type RunKey } from "./api.js";
import type {
  BootstrapResponse,
  ScenarioJson,
  SolveResponse,
  SweepResponse,
} from "./types.js";

export interface PinnedRun {
  name: string; // "A", "B", ...
  key: RunKey;
  scenario: ScenarioJson;
  response: BootstrapResponse;
}

export class ViewState {
  solve: SolveResponse | null = null;
  bootstrap: BootstrapResponse | null = null;
  sweep: SweepResponse | null = null;
  private pins: PinnedRun[] = [];

  pin(name: string, scenario: ScenarioJson, seed: number, response: BootstrapResponse): PinnedRun {
    const key = runKey(scenario, seed);
    const existing = this.pins.find((p) => sameKey(p.key, key));
    if (existing) return existing; // same scenario and seed: same run
    const snapshot: PinnedRun = Object.freeze({
      name,
      key,
      scenario: JSON.parse(JSON.stringify(scenario)) as ScenarioJson,
      response: JSON.parse(JSON.stringify(response)) as BootstrapResponse,
    });
    this.pins = [...this.pins, snapshot];
    return snapshot;
  }

  unpin(name: string): void {
    this.pins = this.pins.filter((p) => p.name !== name);
  }

  pinned(): readonly PinnedRun[] {
    return this.pins;
  }

  findPin(scenario: ScenarioJson, seed: number): PinnedRun | undefined {
    const key = runKey(scenario, seed);
    return this.pins.find((p) => sameKey(p.key, key));
  }
}
