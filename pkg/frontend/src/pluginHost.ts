/**
 * Local HTTP host satisfying the engine's remote-plugin protocol from
 * in-process callables:
 *
 *   POST /embedder   {"texts": [...]}              -> {"vectors": [[...]]}
 *   POST /generator  {"model": ..., "prompt": ...} -> {"text": ...}
 */

import * as http from 'node:http';
import { AddressInfo } from 'node:net';

import type { EmbedCallable, GenerateCallable } from './protocol.js';

export class PluginHost {
  private server: http.Server | null = null;
  private embedder: EmbedCallable | null = null;
  private generator: GenerateCallable | null = null;
  private port = 0;

  register(kind: 'embedder', callable: EmbedCallable): void;
  register(kind: 'generator', callable: GenerateCallable): void;
  register(kind: 'embedder' | 'generator', callable: EmbedCallable | GenerateCallable): void {
    if (kind === 'embedder') {
      this.embedder = callable as EmbedCallable;
    } else {
      this.generator = callable as GenerateCallable;
    }
  }

  endpoint(kind: 'embedder' | 'generator'): string {
    if (this.port === 0) {
      throw new Error('plugin host is not listening yet');
    }
    return `http://127.0.0.1:${this.port}/${kind}`;
  }

  async start(): Promise<void> {
    if (this.server) {
      return;
    }
    const server = http.createServer((req, res) => this.handle(req, res));
    this.server = server;
    await new Promise<void>((resolve) => server.listen(0, '127.0.0.1', resolve));
    this.port = (server.address() as AddressInfo).port;
  }

  async stop(): Promise<void> {
    const server = this.server;
    if (!server) {
      return;
    }
    this.server = null;
    this.port = 0;
    server.closeAllConnections();
    await new Promise<void>((resolve) => server.close(() => resolve()));
  }

  private handle(req: http.IncomingMessage, res: http.ServerResponse): void {
    const chunks: Buffer[] = [];
    req.on('data', (chunk) => chunks.push(chunk));
    req.on('end', () => {
      try {
        const payload = JSON.parse(Buffer.concat(chunks).toString('utf-8'));
        let body: unknown;
        if (req.url === '/embedder' && this.embedder) {
          body = { vectors: this.embedder(payload.texts as string[]) };
        } else if (req.url === '/generator' && this.generator) {
          body = { text: this.generator(payload.prompt as string) };
        } else {
          res.writeHead(404).end();
          return;
        }
        const data = Buffer.from(JSON.stringify(body), 'utf-8');
        res.writeHead(200, {
          'Content-Type': 'application/json',
          'Content-Length': data.length,
        });
        res.end(data);
      } catch (err) {
        const message = err instanceof Error ? err.message : String(err);
        const data = Buffer.from(JSON.stringify({ error: message }), 'utf-8');
        res.writeHead(500, {
          'Content-Type': 'application/json',
          'Content-Length': data.length,
        });
        res.end(data);
      }
    });
  }
}
