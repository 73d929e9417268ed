/**
 * Stub-equivalent callables: the same deterministic rules the engine's
 * built-in stub plugins implement, expressed in TypeScript.
 *
 * The embedder returns raw trigram bucket counts; the engine normalizes
 * remote vectors with the identical routine it applies to its own stub,
 * so a bindings-driven run reproduces a native stub run byte for byte.
 * Rules operate on ASCII whitespace and casing, matching the streams the
 * synthetic generator emits.
 */

import * as zlib from 'node:zlib';

import type { EmbedCallable, GenerateCallable } from './protocol.js';

function tokens(text: string): string[] {
  return text.split(/\s+/).filter((t) => t.length > 0);
}

/** Hashed character-trigram bag over lowercased, whitespace-collapsed text. */
export function trigramCounts(text: string, dimension: number): number[] {
  const key = tokens(text).join(' ').toLowerCase();
  const counts = new Array<number>(dimension).fill(0);
  for (const word of tokens(key)) {
    const padded = Array.from(`^${word}$`);
    for (let i = 0; i + 3 <= padded.length; i++) {
      const trigram = padded.slice(i, i + 3).join('');
      const bucket = zlib.crc32(Buffer.from(trigram, 'utf-8')) % dimension;
      counts[bucket] += 1;
    }
  }
  if (!counts.some((c) => c !== 0)) {
    counts[0] = 1;
  }
  return counts;
}

export function stubEmbedder(dimension: number): EmbedCallable {
  return (texts) => texts.map((t) => trigramCounts(t, dimension));
}

const EVENT_HEADER = 'Summarize this conversation in one short phrase';
const SCENE_HEADER = 'Abstract this specific event into a broader';
const QA_HEADER = 'Please carefully think about the following question';

function lineAfter(prompt: string, marker: string): string {
  for (const line of prompt.split('\n')) {
    if (line.startsWith(marker)) {
      return line.slice(marker.length);
    }
  }
  return '';
}

function tailAfter(prompt: string, marker: string): string {
  const index = prompt.indexOf(marker);
  return index < 0 ? '' : prompt.slice(index + marker.length);
}

function firstTokens(text: string, n = 8): string {
  return tokens(text).slice(0, n).join(' ');
}

function keywordScene(summary: string, table: Record<string, string>): string {
  const lowered = summary.toLowerCase();
  for (const [keyword, label] of Object.entries(table)) {
    if (lowered.includes(keyword.toLowerCase())) {
      return label;
    }
  }
  return 'General Chat';
}

function qaAnswer(prompt: string): string {
  const longTerm = lineAfter(prompt, '## Long-term Memory: ');
  const marker = 'amu(s)): - ';
  const index = longTerm.indexOf(marker);
  if (index >= 0) {
    const rest = longTerm.slice(index + marker.length);
    let cut = rest.length;
    for (const stop of [' - ', ' **']) {
      const pos = rest.indexOf(stop);
      if (pos >= 0 && pos < cut) {
        cut = pos;
      }
    }
    const label = rest.slice(0, cut).trim();
    if (label.length > 0) {
      return label;
    }
  }
  const shortTerm = lineAfter(prompt, '## Short-term Memory: ');
  if (shortTerm.trim().length > 0) {
    const parts = shortTerm.split(' | ');
    const last = parts[parts.length - 1];
    const sep = last.indexOf(': ');
    return sep >= 0 ? last.slice(sep + 2) : last;
  }
  return 'unknown';
}

/** Prompt router identical to the engine's built-in stub generator. */
export function stubGenerator(sceneKeywords: Record<string, string> = {}): GenerateCallable {
  return (prompt) => {
    if (prompt.startsWith(EVENT_HEADER)) {
      return firstTokens(tailAfter(prompt, 'Event phrase: '));
    }
    if (prompt.startsWith(SCENE_HEADER)) {
      return keywordScene(lineAfter(prompt, 'Event: '), sceneKeywords);
    }
    if (prompt.startsWith(QA_HEADER)) {
      return qaAnswer(prompt);
    }
    throw new Error('unrecognized prompt template');
  };
}
