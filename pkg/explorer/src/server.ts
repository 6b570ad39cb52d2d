// Request/response loop: one JSON line in, exactly one JSON line out.
// A malformed request produces an error record and the loop keeps serving;
// diagnostics go to stderr so stdout stays protocol-clean.

import readline from "node:readline";
import type { Readable, Writable } from "node:stream";

import { proposeViaLlm, type LlmSettings } from "./llm.js";
import {
  parseRequestLine,
  ProtocolError,
  type ErrorResponse,
  type ProposalResponse,
} from "./protocol.js";
import { proposeHeuristic, validateSpec } from "./spec.js";

export interface SessionOptions {
  mode: "heuristic" | "llm";
  seed: number;
  llm?: LlmSettings;
}

export async function serve(
  input: Readable,
  output: Writable,
  options: SessionOptions,
): Promise<void> {
  const rl = readline.createInterface({ input, terminal: false });
  for await (const raw of rl) {
    const line = raw.trim();
    if (!line) continue;
    let response: ProposalResponse | ErrorResponse;
    try {
      response = await handleLine(line, options);
    } catch (err) {
      response = { type: "error", message: (err as Error).message };
    }
    output.write(JSON.stringify(response) + "\n");
  }
}

async function handleLine(
  line: string,
  options: SessionOptions,
): Promise<ProposalResponse | ErrorResponse> {
  let request;
  try {
    request = parseRequestLine(line);
  } catch (err) {
    if (err instanceof ProtocolError) {
      return { type: "error", message: err.message };
    }
    throw err;
  }

  if (options.mode === "llm" && options.llm) {
    const fromModel = await proposeViaLlm(request, options.llm);
    if (fromModel) {
      return { type: "proposal", spec: fromModel.spec, commentary: fromModel.commentary };
    }
    process.stderr.write(`round ${request.round}: falling back to heuristic proposal\n`);
  }

  const spec = proposeHeuristic(request.history, options.seed);
  validateSpec(spec);
  return {
    type: "proposal",
    spec,
    commentary: `heuristic proposal for round ${request.round}`,
  };
}
