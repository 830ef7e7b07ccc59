// Scenario drafts: the editable client-side form of a constraint set,
// validated against the same rules the server's JSON schema enforces so
// unsendable drafts are flagged before any request leaves the browser.

import type {
  ConstraintJson,
  Relation,
  ScenarioJson,
  Statistic,
  TargetMode,
} from "./types.js";

export interface ConstraintDraft {
  label?: string;
  feature: string;
  condition?: string;
  statistic: Statistic;
  relation: Relation;
  targetMode: TargetMode;
  targetValue: number | null; // null while the field is empty
}

export interface ScenarioDraft {
  datasetId: string;
  constraints: ConstraintDraft[];
  metrics: string[];
  B: number;
  m: number | null; // null means "use N"
  seed: number;
}

export interface DraftProblem {
  index: number | null; // null for draft-level problems
  message: string;
}

const STATISTICS: Statistic[] = [
  "weighted-mean",
  "weighted-proportion",
  "conditional-mean",
  "count-multiplier",
];
const RELATIONS: Relation[] = ["eq", "le", "ge"];
const MODES: TargetMode[] = ["absolute", "multiple-of-baseline", "lift-percent"];

export function emptyDraft(datasetId: string): ScenarioDraft {
  return { datasetId, constraints: [], metrics: [], B: 199, m: null, seed: 0 };
}

export function validateDraft(draft: ScenarioDraft): DraftProblem[] {
  const problems: DraftProblem[] = [];
  if (!draft.datasetId) {
    problems.push({ index: null, message: "no dataset selected" });
  }
  if (!Number.isInteger(draft.B) || draft.B < 1) {
    problems.push({ index: null, message: "B must be a positive integer" });
  }
  if (draft.m !== null && (!Number.isInteger(draft.m) || draft.m < 1)) {
    problems.push({ index: null, message: "m must be a positive integer" });
  }
  const labels = new Set<string>();
  draft.constraints.forEach((c, i) => {
    if (!c.feature) {
      problems.push({ index: i, message: "feature is required" });
    }
    if (!STATISTICS.includes(c.statistic)) {
      problems.push({ index: i, message: `unknown statistic ${c.statistic}` });
    }
    if (!RELATIONS.includes(c.relation)) {
      problems.push({ index: i, message: `unknown relation ${c.relation}` });
    }
    if (!MODES.includes(c.targetMode)) {
      problems.push({ index: i, message: `unknown target mode ${c.targetMode}` });
    }
    if (c.targetValue === null || !Number.isFinite(c.targetValue)) {
      problems.push({ index: i, message: "target value is required" });
    }
    if (c.statistic === "conditional-mean" && !c.condition) {
      problems.push({ index: i, message: "conditional-mean needs a condition column" });
    }
    if (c.statistic !== "conditional-mean" && c.condition) {
      problems.push({ index: i, message: "condition only applies to conditional-mean" });
    }
    if (c.statistic === "count-multiplier") {
      if (c.relation !== "eq") {
        problems.push({ index: i, message: "count-multiplier requires relation eq" });
      }
      if (c.targetMode !== "multiple-of-baseline") {
        problems.push({
          index: i,
          message: "count-multiplier requires a multiple-of-baseline target",
        });
      }
      if (c.targetValue !== null && c.targetValue <= 0) {
        problems.push({ index: i, message: "count multiplier must be positive" });
      }
    }
    if (c.label) {
      if (labels.has(c.label)) {
        problems.push({ index: i, message: `duplicate label ${c.label}` });
      }
      labels.add(c.label);
    }
  });
  return problems;
}

export function toScenarioJson(draft: ScenarioDraft): ScenarioJson {
  const problems = validateDraft(draft);
  if (problems.length > 0) {
    throw new Error(`draft is not sendable: ${problems[0].message}`);
  }
  const constraints: ConstraintJson[] = draft.constraints.map((c) => {
    const out: ConstraintJson = {
      feature: c.feature,
      statistic: c.statistic,
      relation: c.relation,
      target: { mode: c.targetMode, value: c.targetValue as number },
    };
    if (c.label) out.label = c.label;
    if (c.condition) out.condition = c.condition;
    return out;
  });
  return { constraints };
}

export function fromScenarioJson(
  datasetId: string,
  scenario: ScenarioJson,
): ScenarioDraft {
  const draft = emptyDraft(datasetId);
  draft.constraints = scenario.constraints.map((c) => ({
    label: c.label,
    feature: c.feature,
    condition: c.condition,
    statistic: c.statistic,
    relation: c.relation,
    targetMode: c.target.mode,
    targetValue: c.target.value,
  }));
  return draft;
}

/** Stable hash of a scenario document, used to key pinned runs and to
 * discard stale responses. FNV-1a over a canonical serialization. */
export function scenarioHash(scenario: ScenarioJson): string {
  const canonical = JSON.stringify(
    scenario.constraints.map((c) => [
      c.label ?? "",
      c.feature,
      c.condition ?? "",
      c.statistic,
      c.relation,
      c.target.mode,
      c.target.value,
    ]),
  );
  let hash = 0x811c9dc5;
  for (let i = 0; i < canonical.length; i++) {
    hash ^= canonical.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193) >>> 0;
  }
  return hash.toString(16).padStart(8, "0");
}
