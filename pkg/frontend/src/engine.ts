/**
 * BoundEngine: one engine process per handle, driven over stdio JSON lines.
 *
 * The handle enforces the engine's single-writer contract locally: while
 * any call is in flight, further calls throw instead of queueing, so a
 * plugin callable can never re-enter `feed` on the handle that is
 * currently inside it.
 */

import { ChildProcessWithoutNullStreams, spawn } from 'node:child_process';
import * as fs from 'node:fs';
import * as os from 'node:os';
import * as path from 'node:path';
import * as readline from 'node:readline';

import { PluginHost } from './pluginHost.js';
import type {
  EmbedCallable,
  EngineConfigDoc,
  EvidencePath,
  GenerateCallable,
  ProbeResult,
  Response,
  StreamEvent,
} from './protocol.js';

const PYTHON = process.env.STREAMMEM_PYTHON ?? 'python3';

export class EngineError extends Error {
  constructor(public readonly type: string, message: string) {
    super(`${type}: ${message}`);
  }
}

export class BoundEngine {
  private child: ChildProcessWithoutNullStreams;
  private lines: AsyncIterator<string>;
  private host: PluginHost | null = null;
  private busy = false;
  private closed = false;
  private stderr = '';
  private configDir: string;

  private constructor(child: ChildProcessWithoutNullStreams, configDir: string) {
    this.child = child;
    this.configDir = configDir;
    child.stderr.on('data', (chunk) => {
      this.stderr += chunk.toString();
    });
    // a dying child must surface as EngineExited, not an EPIPE crash
    child.stdin.on('error', () => undefined);
    child.on('error', () => undefined);
    const rl = readline.createInterface({ input: child.stdout });
    this.lines = rl[Symbol.asyncIterator]();
  }

  /** Spawn an engine process for `config`; rejects on invalid config. */
  static async create(config: EngineConfigDoc = {}): Promise<BoundEngine> {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), 'streammem-'));
    const configPath = path.join(dir, 'config.json');
    fs.writeFileSync(configPath, JSON.stringify(config));
    const child = spawn(PYTHON, ['-m', 'streammem.cli', 'serve', '--config', configPath], {
      stdio: ['pipe', 'pipe', 'pipe'],
    });
    const engine = new BoundEngine(child, dir);
    try {
      await engine.request({ op: 'config' });
    } catch (err) {
      engine.dispose();
      throw err;
    }
    return engine;
  }

  /** Feed one stream event; probes resolve with an answer, updates with null. */
  async feed(event: StreamEvent): Promise<ProbeResult | null> {
    const response = await this.request({ op: 'feed', event });
    return (response.result ?? null) as ProbeResult | null;
  }

  /** Canonical JSON snapshot of the full engine state. */
  async snapshot(): Promise<string> {
    const response = await this.request({ op: 'snapshot' });
    return response.snapshot as string;
  }

  /** Read-only retrieval (no access counters are touched). */
  async search(query: string, options: Record<string, number | boolean> = {}):
      Promise<EvidencePath[]> {
    const response = await this.request({ op: 'search', query, ...options });
    return response.paths ?? [];
  }

  /** Full engine configuration, defaults filled in. */
  async config(): Promise<EngineConfigDoc> {
    const response = await this.request({ op: 'config' });
    return response.config as EngineConfigDoc;
  }

  /**
   * Serve an in-process callable to the engine as its embedder or
   * generator. Dimension mismatches surface as an error on first embed.
   */
  async registerCallablePlugin(kind: 'embedder', callable: EmbedCallable,
                               options?: { dimension?: number }): Promise<void>;
  async registerCallablePlugin(kind: 'generator', callable: GenerateCallable): Promise<void>;
  async registerCallablePlugin(
    kind: 'embedder' | 'generator',
    callable: EmbedCallable | GenerateCallable,
    options: { dimension?: number } = {},
  ): Promise<void> {
    if (!this.host) {
      this.host = new PluginHost();
      await this.host.start();
    }
    this.host.register(kind as 'embedder', callable as EmbedCallable);
    const request: Record<string, unknown> = {
      op: 'register_plugin',
      kind,
      endpoint: this.host.endpoint(kind),
    };
    if (kind === 'embedder' && options.dimension !== undefined) {
      request.dimension = options.dimension;
    }
    await this.request(request);
  }

  /** Shut the engine down; the handle is invalid afterwards. */
  async close(): Promise<void> {
    if (this.closed) {
      return;
    }
    try {
      await this.request({ op: 'close' });
    } finally {
      this.dispose();
    }
  }

  private dispose(): void {
    this.closed = true;
    this.child.kill();
    if (this.host) {
      void this.host.stop();
      this.host = null;
    }
    fs.rmSync(this.configDir, { recursive: true, force: true });
  }

  private async request(body: Record<string, unknown>): Promise<Response> {
    if (this.closed) {
      throw new EngineError('HandleClosed', 'engine handle was closed');
    }
    if (this.busy) {
      throw new EngineError(
        'EngineBusy',
        'call in flight: one handle is a single writer and may not be re-entered',
      );
    }
    this.busy = true;
    try {
      this.child.stdin.write(JSON.stringify(body) + '\n');
      const next = await this.lines.next();
      if (next.done) {
        throw new EngineError(
          'EngineExited',
          `engine process ended unexpectedly: ${this.stderr.trim().split('\n').pop() ?? ''}`,
        );
      }
      const response = JSON.parse(next.value) as Response;
      if (!response.ok) {
        const error = response.error ?? { type: 'Unknown', message: 'unknown failure' };
        throw new EngineError(error.type, error.message);
      }
      return response;
    } finally {
      this.busy = false;
    }
  }
}
