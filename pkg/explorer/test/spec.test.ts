import { describe, expect, it } from "vitest";

import type { ControllerSpec, HistoryEntryPayload } from "../src/protocol.js";
import {
  bestEntry,
  defaultSpec,
  proposeHeuristic,
  SpecValidationError,
  validateSpec,
} from "../src/spec.js";

function entry(round: number, spec: ControllerSpec, accuracy: number, tokens: number): HistoryEntryPayload {
  return {
    round,
    spec,
    curve: [{ beta: 1.0, accuracy, mean_intervals: 5, mean_tokens: tokens, objective: accuracy }],
    digests: [],
    commentary: "",
    failed: false,
  };
}

function knobs(spec: ControllerSpec): Map<string, string> {
  const out = new Map<string, string>();
  for (const [k, v] of Object.entries(spec.parameters)) out.set(k, JSON.stringify(v));
  for (const e of spec.beta_map) out.set(`map:${e.name}`, JSON.stringify([e.base, e.coefficient]));
  return out;
}

describe("validateSpec", () => {
  it("accepts the default spec", () => {
    expect(() => validateSpec(defaultSpec())).not.toThrow();
  });

  it("rejects negative coefficients", () => {
    const spec = defaultSpec();
    spec.beta_map[0].coefficient = -0.1;
    expect(() => validateSpec(spec)).toThrow(SpecValidationError);
  });

  it("rejects unknown kinds and parameters", () => {
    expect(() => validateSpec({ kind: "sc", parameters: {}, beta_map: [] })).toThrow();
    expect(() =>
      validateSpec({ kind: "round_policy", parameters: { mystery: 1 }, beta_map: [] }),
    ).toThrow();
  });

  it("rejects maps that drive ema_alpha nonpositive", () => {
    const spec: ControllerSpec = {
      kind: "round_policy",
      parameters: {},
      beta_map: [{ name: "ema_alpha", base: 0.3, coefficient: 0.5 }],
    };
    expect(() => validateSpec(spec)).toThrow(/ema_alpha/);
  });
});

describe("proposeHeuristic", () => {
  it("proposes the default spec on an empty history", () => {
    expect(proposeHeuristic([])).toEqual(defaultSpec());
  });

  it("is deterministic", () => {
    const history = [entry(1, defaultSpec(), 0.7, 1000)];
    expect(proposeHeuristic(history, 3)).toEqual(proposeHeuristic(history, 3));
    expect(proposeHeuristic(history, 3)).not.toEqual(proposeHeuristic(history, 4));
  });

  it("changes exactly one knob of the best entry", () => {
    const base = defaultSpec();
    const second = proposeHeuristic([entry(1, base, 0.7, 1000)]);
    const before = knobs(base);
    const after = knobs(second);
    expect([...after.keys()].sort()).toEqual([...before.keys()].sort());
    const changed = [...before.keys()].filter((k) => before.get(k) !== after.get(k));
    expect(changed).toHaveLength(1);
    expect(() => validateSpec(second)).not.toThrow();
  });

  it("builds on the best entry, not the latest", () => {
    const base = defaultSpec();
    const second = proposeHeuristic([entry(1, base, 0.9, 500)]);
    const history = [entry(1, base, 0.9, 500), entry(2, second, 0.4, 400)];
    const third = proposeHeuristic(history);
    const fromBest = [...knobs(base).keys()].filter(
      (k) => knobs(base).get(k) !== knobs(third).get(k),
    );
    expect(fromBest).toHaveLength(1);
  });

  it("skips failed rounds", () => {
    const failed: HistoryEntryPayload = {
      round: 1,
      spec: null,
      curve: [],
      digests: [],
      commentary: "",
      failed: true,
    };
    expect(proposeHeuristic([failed])).toEqual(defaultSpec());
  });
});

describe("bestEntry", () => {
  it("prefers accuracy, then fewer tokens", () => {
    const a = entry(1, defaultSpec(), 0.7, 500);
    const b = entry(2, defaultSpec(), 0.7, 300);
    const c = entry(3, defaultSpec(), 0.6, 100);
    expect(bestEntry([a, b, c]).round).toBe(2);
  });
});
