import { PassThrough } from "node:stream";
import { describe, expect, it } from "vitest";

import { extractJsonObject, proposeViaLlm, specFromModelText, type LlmSettings } from "../src/llm.js";
import type { ProposeRequest } from "../src/protocol.js";
import { serve } from "../src/server.js";
import { defaultSpec } from "../src/spec.js";

const REQUEST: ProposeRequest = { type: "propose", round: 1, prompt: "design", history: [] };

function completion(content: string): Response {
  return new Response(
    JSON.stringify({ choices: [{ message: { content } }] }),
    { status: 200, headers: { "content-type": "application/json" } },
  );
}

function settings(fetchFn: typeof fetch, retries = 1): LlmSettings {
  return { endpoint: "http://example.test/v1/chat/completions", model: "m", retries, fetchFn };
}

const VALID_CONTENT =
  'Here you go:\n{"type": "proposal", "spec": {"kind": "round_policy", "parameters": ' +
  '{"ema_alpha": 0.4}, "beta_map": [{"name": "max_width", "base": 4, "coefficient": 6}]}, ' +
  '"commentary": "wider"}';

describe("extractJsonObject", () => {
  it("pulls a balanced object out of prose", () => {
    const record = extractJsonObject('noise {"a": {"b": "}"}} trailing') as { a: unknown };
    expect(record).toEqual({ a: { b: "}" } });
  });

  it("returns null when there is none", () => {
    expect(extractJsonObject("no objects here")).toBeNull();
  });
});

describe("specFromModelText", () => {
  it("accepts a full proposal envelope", () => {
    const { spec, commentary } = specFromModelText(VALID_CONTENT);
    expect(spec.kind).toBe("round_policy");
    expect(commentary).toBe("wider");
  });

  it("accepts a bare spec object", () => {
    const { spec } = specFromModelText(
      '{"kind": "round_policy", "parameters": {}, "beta_map": []}',
    );
    expect(spec.beta_map).toEqual([]);
  });

  it("rejects invalid specs", () => {
    expect(() =>
      specFromModelText('{"kind": "round_policy", "parameters": {"bogus": 3}, "beta_map": []}'),
    ).toThrow();
  });
});

describe("proposeViaLlm", () => {
  it("returns the parsed spec on success", async () => {
    const proposal = await proposeViaLlm(REQUEST, settings(async () => completion(VALID_CONTENT)));
    expect(proposal?.spec.parameters.ema_alpha).toBe(0.4);
  });

  it("retries then gives up on garbage output", async () => {
    let calls = 0;
    const proposal = await proposeViaLlm(
      REQUEST,
      settings(async () => {
        calls += 1;
        return completion("I refuse to emit JSON");
      }, 2),
    );
    expect(proposal).toBeNull();
    expect(calls).toBe(3);
  });

  it("treats transport errors as retriable", async () => {
    let calls = 0;
    const proposal = await proposeViaLlm(
      REQUEST,
      settings(async () => {
        calls += 1;
        if (calls === 1) throw new Error("connection refused");
        return completion(VALID_CONTENT);
      }),
    );
    expect(proposal?.spec.kind).toBe("round_policy");
  });
});

describe("llm mode fallback in the server", () => {
  it("falls back to a heuristic proposal when the model never parses", async () => {
    const input = new PassThrough();
    const output = new PassThrough();
    const done = serve(input, output, {
      mode: "llm",
      seed: 0,
      llm: settings(async () => completion("still not json"), 0),
    });
    input.write(JSON.stringify(REQUEST) + "\n");
    input.end();
    await done;
    const record = JSON.parse(output.read().toString());
    expect(record.type).toBe("proposal");
    expect(record.spec).toEqual(defaultSpec());
    expect(record.commentary).toContain("heuristic");
  });
});
