// Wire types for the discovery stdio protocol: one JSON record per line.

export interface BetaMapEntry {
  name: string;
  base: number;
  coefficient: number;
}

export interface ControllerSpec {
  kind: string;
  parameters: Record<string, unknown>;
  beta_map: BetaMapEntry[];
}

export interface CurvePoint {
  beta: number;
  accuracy: number;
  mean_intervals: number;
  mean_tokens: number;
  objective: number;
}

export interface HistoryEntryPayload {
  round: number;
  spec: ControllerSpec | null;
  curve: CurvePoint[];
  digests: unknown[];
  commentary: string;
  failed?: boolean;
  failure_reason?: string;
}

export interface ProposeRequest {
  type: "propose";
  round: number;
  prompt: string;
  history: HistoryEntryPayload[];
}

export interface ProposalResponse {
  type: "proposal";
  spec: ControllerSpec;
  commentary: string;
}

export interface ErrorResponse {
  type: "error";
  message: string;
}

export class ProtocolError extends Error {}

export function parseRequestLine(line: string): ProposeRequest {
  let record: unknown;
  try {
    record = JSON.parse(line);
  } catch (err) {
    throw new ProtocolError(`unparseable request line: ${(err as Error).message}`);
  }
  if (typeof record !== "object" || record === null) {
    throw new ProtocolError("request must be a JSON object");
  }
  const req = record as Partial<ProposeRequest>;
  if (req.type !== "propose") {
    throw new ProtocolError(`unsupported request type ${JSON.stringify(req.type)}`);
  }
  if (typeof req.round !== "number") {
    throw new ProtocolError("request is missing a numeric round");
  }
  return {
    type: "propose",
    round: req.round,
    prompt: typeof req.prompt === "string" ? req.prompt : "",
    history: Array.isArray(req.history) ? (req.history as HistoryEntryPayload[]) : [],
  };
}
