import { describe, expect, it } from "vitest";

import { ApiClient, RequestGate, runKey, sameKey, type FetchLike } from "../src/api.js";
import { ApiError } from "../src/types.js";

function fakeFetch(
  handler: (url: string, body: unknown) => { status: number; payload: unknown },
): FetchLike {
  return async (url, init) => {
    const body = init?.body ? JSON.parse(init.body) : undefined;
    const { status, payload } = handler(url, body);
    return {
      ok: status >= 200 && status < 300,
      status,
      json: async () => payload,
    };
  };
}

const scenario = { constraints: [] };

describe("ApiClient", () => {
  it("posts scenario requests and returns the payload", async () => {
    const client = new ApiClient(
      "http://svc",
      fakeFetch((url, body) => {
        expect(url).toBe("http://svc/solve");
        expect((body as { dataset_id: string }).dataset_id).toBe("ds-1");
        return { status: 200, payload: { seed: 3, status: "converged" } };
      }),
    );
    const resp = await client.solve("ds-1", scenario, 3);
    expect(resp.seed).toBe(3);
  });

  it("wraps non-2xx responses in ApiError with the detail payload", async () => {
    const detail = {
      offending_labels: ["male-age-100"],
      evidence: "range-violation",
      dual_norm_at_stop: 0,
      message: "unreachable target",
    };
    const client = new ApiClient(
      "http://svc",
      fakeFetch(() => ({ status: 422, payload: { detail } })),
    );
    const err = await client.solve("ds-1", scenario, 0).catch((e) => e as ApiError);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(422);
    expect((err as ApiError).infeasibility()?.offending_labels).toEqual(["male-age-100"]);
  });

  it("infeasibility() is null for non-422 errors", async () => {
    const client = new ApiClient(
      "http://svc",
      fakeFetch(() => ({ status: 404, payload: { detail: "unknown dataset" } })),
    );
    const err = await client.datasetSummary("nope").catch((e) => e as ApiError);
    expect((err as ApiError).infeasibility()).toBeNull();
  });
});

describe("RequestGate", () => {
  it("returns the result when no newer submission arrives", async () => {
    const gate = new RequestGate<number>();
    const out = await gate.submit(runKey(scenario, 1), async () => 42);
    expect(out).toBe(42);
  });

  it("discards stale responses when a newer key is submitted", async () => {
    const gate = new RequestGate<string>();
    let releaseFirst!: () => void;
    const firstBlocked = new Promise<void>((r) => (releaseFirst = r));

    const first = gate.submit(runKey(scenario, 1), async () => {
      await firstBlocked;
      return "first";
    });
    const second = gate.submit(runKey(scenario, 2), async () => "second");

    expect(await second).toBe("second");
    releaseFirst();
    expect(await first).toBeNull(); // superseded, result dropped
  });

  it("aborts the in-flight request on re-submit", async () => {
    const gate = new RequestGate<string>();
    let observedAbort = false;
    const first = gate.submit(runKey(scenario, 1), async (signal) => {
      await new Promise((r) => setTimeout(r, 20));
      observedAbort = signal.aborted;
      if (signal.aborted) throw new Error("aborted");
      return "first";
    });
    const second = await gate.submit(runKey(scenario, 2), async () => "second");
    expect(second).toBe("second");
    expect(await first).toBeNull();
    expect(observedAbort).toBe(true);
  });

  it("keys runs by scenario hash and seed", () => {
    const a = runKey({ constraints: [] }, 1);
    const b = runKey({ constraints: [] }, 1);
    const c = runKey({ constraints: [] }, 2);
    expect(sameKey(a, b)).toBe(true);
    expect(sameKey(a, c)).toBe(false);
  });
});
