// Round-policy spec helpers: the default proposal, local validation that
// mirrors the harness-side rules, and the deterministic mutation schedule.

import type { BetaMapEntry, ControllerSpec, HistoryEntryPayload } from "./protocol.js";

const EXPANDING = new Set([
  "stop_conf_threshold",
  "stop_trend_min",
  "widen_delta_threshold",
  "max_width",
  "burst_aligned",
  "abandon_patience",
  "hard_interval_cap",
]);
const CONTRACTING = new Set(["ema_alpha"]);
const KNOWN = new Set([...EXPANDING, ...CONTRACTING]);

export class SpecValidationError extends Error {}

export function defaultSpec(): ControllerSpec {
  return {
    kind: "round_policy",
    parameters: {
      ema_alpha: 0.3,
      stop_trend_min: 0.0,
      widen_delta_threshold: 0.01,
    },
    beta_map: [
      { name: "stop_conf_threshold", base: 0.7, coefficient: 0.2 },
      { name: "max_width", base: 4, coefficient: 8 },
      { name: "burst_aligned", base: 0, coefficient: 2 },
      { name: "abandon_patience", base: 2, coefficient: 1 },
    ],
  };
}

/** Mirror of the harness-side validator, so bad proposals never leave the client. */
export function validateSpec(spec: ControllerSpec): void {
  if (spec.kind !== "round_policy") {
    throw new SpecValidationError(`proposals must use kind round_policy, got ${spec.kind}`);
  }
  for (const name of Object.keys(spec.parameters ?? {})) {
    if (!KNOWN.has(name)) {
      throw new SpecValidationError(`unknown parameter ${name}`);
    }
  }
  for (const entry of spec.beta_map ?? []) {
    if (!KNOWN.has(entry.name)) {
      throw new SpecValidationError(`unknown beta_map target ${entry.name}`);
    }
    if (!Number.isFinite(entry.base) || !Number.isFinite(entry.coefficient)) {
      throw new SpecValidationError(`non-finite beta_map entry for ${entry.name}`);
    }
    if (entry.coefficient < 0) {
      throw new SpecValidationError(`negative budget coefficient for ${entry.name}`);
    }
  }
  for (const beta of [0.0, 0.25, 0.5, 0.75, 1.0]) {
    const values: Record<string, number> = { ema_alpha: 0.3, stop_conf_threshold: 0.7 };
    for (const [name, value] of Object.entries(spec.parameters ?? {})) {
      if (typeof value === "number") values[name] = value;
    }
    for (const entry of spec.beta_map ?? []) {
      const direction = CONTRACTING.has(entry.name) ? -1 : 1;
      values[entry.name] = entry.base + direction * entry.coefficient * beta;
    }
    if (values.ema_alpha <= 0) {
      throw new SpecValidationError(`ema_alpha is not positive at beta ${beta}`);
    }
    if (values.stop_conf_threshold <= 0) {
      throw new SpecValidationError(`stop_conf_threshold is not positive at beta ${beta}`);
    }
  }
}

// Mutation schedule. Kept in lockstep with the harness's scripted explorer so
// heuristic mode proposes the same sequence of controllers.

type Rule = { name: string; where: "base" | "param"; nudge: (v: number) => number };

const SCHEDULE: Rule[] = [
  { name: "widen_delta_threshold", where: "param", nudge: (v) => (v > 0 ? v * 5.0 : 0.05) },
  { name: "stop_conf_threshold", where: "base", nudge: (v) => v * 0.9 },
  { name: "max_width", where: "base", nudge: (v) => v + 4 },
  { name: "burst_aligned", where: "base", nudge: (v) => v + 1 },
  { name: "stop_conf_threshold", where: "base", nudge: (v) => v * 1.1 },
  { name: "abandon_patience", where: "base", nudge: (v) => (v <= 1 ? v + 1 : v - 1) },
  { name: "ema_alpha", where: "param", nudge: (v) => (v * 1.5 <= 1.0 ? v * 1.5 : v * 0.75) },
  { name: "widen_delta_threshold", where: "param", nudge: (v) => (v > 0 ? v * 0.5 : -0.01) },
];

const PARAM_FALLBACKS: Record<string, number> = {
  widen_delta_threshold: 0.01,
  ema_alpha: 0.3,
  stop_trend_min: 0.0,
};

function entryBest(entry: HistoryEntryPayload): [number, number] {
  let acc = -1;
  let tokens = Number.POSITIVE_INFINITY;
  for (const point of entry.curve ?? []) {
    if (point.accuracy > acc || (point.accuracy === acc && point.mean_tokens < tokens)) {
      acc = point.accuracy;
      tokens = point.mean_tokens;
    }
  }
  return [acc, tokens];
}

export function bestEntry(entries: HistoryEntryPayload[]): HistoryEntryPayload {
  let best = entries[0];
  let [bestAcc, bestTokens] = entryBest(best);
  for (const entry of entries.slice(1)) {
    const [acc, tokens] = entryBest(entry);
    if (acc > bestAcc || (acc === bestAcc && tokens < bestTokens)) {
      best = entry;
      bestAcc = acc;
      bestTokens = tokens;
    }
  }
  return best;
}

function applyRule(spec: ControllerSpec, rule: Rule): ControllerSpec {
  const clone: ControllerSpec = {
    kind: spec.kind,
    parameters: { ...spec.parameters },
    beta_map: spec.beta_map.map((e) => ({ ...e })),
  };
  if (rule.where === "base") {
    const entry = clone.beta_map.find((e): e is BetaMapEntry => e.name === rule.name);
    if (entry) {
      entry.base = rule.nudge(entry.base);
      return clone;
    }
  }
  const current = clone.parameters[rule.name];
  const value = typeof current === "number" ? current : PARAM_FALLBACKS[rule.name] ?? 0;
  clone.parameters[rule.name] = rule.nudge(value);
  return clone;
}

/** Heuristic proposal: the default spec first, then one-knob perturbations of
 * the best entry so far, cycling a fixed schedule (offset by seed). */
export function proposeHeuristic(history: HistoryEntryPayload[], seed = 0): ControllerSpec {
  const successful = history.filter((e) => !e.failed && e.spec);
  if (successful.length === 0) {
    return defaultSpec();
  }
  const base = bestEntry(successful).spec as ControllerSpec;
  const index = (seed + history.length - 1) % SCHEDULE.length;
  return applyRule(base, SCHEDULE[index]);
}
