// Thin fetch wrapper over the scenario-analysis service plus the
// one-in-flight-per-view request gate: re-submitting a view cancels the
// pending request, and responses whose (scenario hash, seed) no longer
// match the latest submission are discarded as stale.

import { scenarioHash } from "./scenario.js";
import {
  ApiError,
  type BootstrapResponse,
  type DatasetSummary,
  type ScenarioJson,
  type SolveResponse,
  type SweepResponse,
} from "./types.js";

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string; signal?: AbortSignal },
) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch as unknown as FetchLike,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown, signal?: AbortSignal): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
      signal,
    });
    const payload = await resp.json();
    if (!resp.ok) {
      throw new ApiError(resp.status, (payload as { detail?: unknown }).detail ?? payload);
    }
    return payload as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/health");
  }

  registerDataset(path: string, schema: unknown): Promise<{ id: string; n_rows: number }> {
    return this.request("POST", "/datasets", { path, schema });
  }

  datasetSummary(id: string): Promise<DatasetSummary> {
    return this.request("GET", `/datasets/${id}/summary`);
  }

  validateScenario(scenario: ScenarioJson): Promise<{ valid: boolean; constraints: string[] }> {
    return this.request("POST", "/scenarios/validate", { scenario });
  }

  solve(datasetId: string, scenario: ScenarioJson, seed: number, signal?: AbortSignal): Promise<SolveResponse> {
    return this.request("POST", "/solve", { dataset_id: datasetId, scenario, seed }, signal);
  }

  bootstrap(
    datasetId: string,
    scenario: ScenarioJson,
    opts: { B: number; m?: number | null; seed: number },
    signal?: AbortSignal,
  ): Promise<BootstrapResponse> {
    return this.request(
      "POST",
      "/bootstrap",
      { dataset_id: datasetId, scenario, B: opts.B, m: opts.m ?? undefined, seed: opts.seed },
      signal,
    );
  }

  sweep(
    datasetId: string,
    axes: { feature: string; grid: number[]; mode?: string }[],
    opts: { B: number; seed: number; metric?: string; level?: number; scenario?: ScenarioJson },
    signal?: AbortSignal,
  ): Promise<SweepResponse> {
    return this.request(
      "POST",
      "/sweep",
      {
        dataset_id: datasetId,
        axes,
        B: opts.B,
        seed: opts.seed,
        metric: opts.metric,
        level: opts.level,
        scenario: opts.scenario,
      },
      signal,
    );
  }
}

export interface RunKey {
  scenarioHash: string;
  seed: number;
}

export function runKey(scenario: ScenarioJson, seed: number): RunKey {
  return { scenarioHash: scenarioHash(scenario), seed };
}

export function sameKey(a: RunKey, b: RunKey): boolean {
  return a.scenarioHash === b.scenarioHash && a.seed === b.seed;
}

/** Serializes requests for one view: the latest submission wins, earlier
 * in-flight requests are aborted and their results dropped. */
export class RequestGate<T> {
  private current: RunKey | null = null;
  private controller: AbortController | null = null;

  /** Runs `task`; resolves null if a newer submission superseded this one. */
  async submit(
    key: RunKey,
    task: (signal: AbortSignal) => Promise<T>,
  ): Promise<T | null> {
    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;
    this.current = key;
    let result: T;
    try {
      result = await task(controller.signal);
    } catch (err) {
      if (controller.signal.aborted) return null;
      throw err;
    }
    if (this.current === null || !sameKey(this.current, key) || controller.signal.aborted) {
      return null; // stale: a different (scenario, seed) was submitted since
    }
    return result;
  }
}
