// Optional LLM-backed proposal mode: forwards the discovery prompt and
// history to a chat-completions endpoint and parses the returned spec.
// Endpoint, model, and key come from the environment; any parse or
// validation failure is retried, then the caller falls back to heuristics.

import type { ControllerSpec, ProposeRequest } from "./protocol.js";
import { validateSpec } from "./spec.js";

export interface LlmSettings {
  endpoint: string;
  model: string;
  apiKey?: string;
  retries: number;
  /** base for exponential backoff between attempts; 0 disables waiting */
  baseDelayMs?: number;
  fetchFn?: typeof fetch;
}

export function llmSettingsFromEnv(env: NodeJS.ProcessEnv): LlmSettings | null {
  const endpoint = env.EXPLORER_LLM_ENDPOINT;
  const model = env.EXPLORER_LLM_MODEL;
  if (!endpoint || !model) return null;
  return {
    endpoint,
    model,
    apiKey: env.EXPLORER_LLM_API_KEY,
    retries: Number.parseInt(env.EXPLORER_PARSE_RETRIES ?? "2", 10),
    baseDelayMs: 500,
  };
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

function historySummary(request: ProposeRequest): string {
  const rows = request.history.map((entry) => ({
    round: entry.round,
    failed: entry.failed ?? false,
    spec: entry.spec,
    curve: entry.curve,
    digests: entry.digests,
    commentary: entry.commentary,
  }));
  return JSON.stringify(rows);
}

export function buildMessages(request: ProposeRequest): Array<{ role: string; content: string }> {
  return [
    { role: "system", content: request.prompt },
    {
      role: "user",
      content:
        `Round ${request.round}. History so far (JSON): ${historySummary(request)}\n` +
        `Reply with a single JSON object: {"type": "proposal", "spec": {...}, ` +
        `"commentary": "..."}.`,
    },
  ];
}

/** Pull the first balanced JSON object out of free-form model text. */
export function extractJsonObject(text: string): unknown | null {
  const start = text.indexOf("{");
  if (start < 0) return null;
  let depth = 0;
  let inString = false;
  let escaped = false;
  for (let i = start; i < text.length; i++) {
    const ch = text[i];
    if (inString) {
      if (escaped) escaped = false;
      else if (ch === "\\") escaped = true;
      else if (ch === '"') inString = false;
      continue;
    }
    if (ch === '"') inString = true;
    else if (ch === "{") depth += 1;
    else if (ch === "}") {
      depth -= 1;
      if (depth === 0) {
        try {
          return JSON.parse(text.slice(start, i + 1));
        } catch {
          return null;
        }
      }
    }
  }
  return null;
}

export function specFromModelText(text: string): { spec: ControllerSpec; commentary: string } {
  const record = extractJsonObject(text) as
    | { spec?: ControllerSpec; kind?: string; commentary?: string }
    | null;
  if (!record) {
    throw new Error("no JSON object in model output");
  }
  // accept either the full proposal envelope or a bare spec object
  const spec = (record.spec ?? (record.kind ? record : null)) as ControllerSpec | null;
  if (!spec || typeof spec.kind !== "string") {
    throw new Error("model output carries no controller spec");
  }
  const normalized: ControllerSpec = {
    kind: spec.kind,
    parameters: spec.parameters ?? {},
    beta_map: spec.beta_map ?? [],
  };
  validateSpec(normalized);
  return { spec: normalized, commentary: typeof record.commentary === "string" ? record.commentary : "" };
}

export async function proposeViaLlm(
  request: ProposeRequest,
  settings: LlmSettings,
): Promise<{ spec: ControllerSpec; commentary: string } | null> {
  const doFetch = settings.fetchFn ?? fetch;
  const headers: Record<string, string> = { "content-type": "application/json" };
  if (settings.apiKey) headers.authorization = `Bearer ${settings.apiKey}`;
  const body = JSON.stringify({
    model: settings.model,
    messages: buildMessages(request),
    temperature: 0.7,
  });
  for (let attempt = 0; attempt <= settings.retries; attempt++) {
    if (attempt > 0 && settings.baseDelayMs) {
      await sleep(settings.baseDelayMs * 2 ** (attempt - 1));
    }
    try {
      const response = await doFetch(settings.endpoint, { method: "POST", headers, body });
      if (!response.ok) {
        throw new Error(`endpoint returned ${response.status}`);
      }
      const payload = (await response.json()) as {
        choices?: Array<{ message?: { content?: string } }>;
      };
      const content = payload.choices?.[0]?.message?.content;
      if (typeof content !== "string") {
        throw new Error("no message content in completion");
      }
      return specFromModelText(content);
    } catch (err) {
      process.stderr.write(
        `llm proposal attempt ${attempt + 1}/${settings.retries + 1} failed: ${(err as Error).message}\n`,
      );
    }
  }
  return null;
}
