import { execFileSync } from 'node:child_process';
import * as fs from 'node:fs';
import * as os from 'node:os';
import * as path from 'node:path';

import { BoundEngine } from '../src/engine.js';
import type { EngineConfigDoc, StreamEvent } from '../src/protocol.js';

const PYTHON = process.env.STREAMMEM_PYTHON ?? 'python3';

export interface SynthesizedStream {
  events: StreamEvent[];
  config: EngineConfigDoc;
}

/** Generate a synthetic stream + matching config via the engine CLI. */
export function synthStream(seed: number, turns: number): SynthesizedStream {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), 'streammem-ts-'));
  const streamPath = path.join(dir, 'stream.jsonl');
  const configPath = path.join(dir, 'config.json');
  try {
    execFileSync(PYTHON, [
      '-m', 'streammem.cli', 'synth',
      '--seed', String(seed),
      '--turns', String(turns),
      '--topics', '3',
      '--probe-rate', '0.15',
      '--out', streamPath,
      '--config-out', configPath,
    ]);
    const events = fs
      .readFileSync(streamPath, 'utf-8')
      .split('\n')
      .filter((line) => line.trim().length > 0)
      .map((line) => JSON.parse(line) as StreamEvent);
    const config = JSON.parse(fs.readFileSync(configPath, 'utf-8')) as EngineConfigDoc;
    return { events, config };
  } finally {
    fs.rmSync(dir, { recursive: true, force: true });
  }
}

export interface RunResult {
  answers: string[];
  snapshot: string;
}

/** Drive every event through an engine handle; collect probe answers. */
export async function runStream(
  engine: BoundEngine,
  events: StreamEvent[],
): Promise<RunResult> {
  const answers: string[] = [];
  for (const event of events) {
    const result = await engine.feed(event);
    if (result !== null) {
      answers.push(result.answer);
    }
  }
  const snapshot = await engine.snapshot();
  return { answers, snapshot };
}
