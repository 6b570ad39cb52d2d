// Entry point: configure from the environment and serve stdin/stdout until
// the driver closes the request stream.

import { llmSettingsFromEnv } from "./llm.js";
import { serve, type SessionOptions } from "./server.js";

function optionsFromEnv(env: NodeJS.ProcessEnv): SessionOptions {
  const requested = (env.EXPLORER_MODE ?? "heuristic").toLowerCase();
  const llm = llmSettingsFromEnv(env);
  if (requested === "llm" && !llm) {
    process.stderr.write(
      "EXPLORER_MODE=llm but EXPLORER_LLM_ENDPOINT/EXPLORER_LLM_MODEL are unset; " +
        "serving heuristic proposals\n",
    );
  }
  return {
    mode: requested === "llm" && llm ? "llm" : "heuristic",
    seed: Number.parseInt(env.EXPLORER_SEED ?? "0", 10),
    llm: llm ?? undefined,
  };
}

serve(process.stdin, process.stdout, optionsFromEnv(process.env)).catch((err) => {
  process.stderr.write(`explorer client error: ${(err as Error).message}\n`);
  process.exitCode = 1;
});
