import { describe, expect, it } from 'vitest';

import { BoundEngine } from '../src/engine.js';
import { stubEmbedder, stubGenerator } from '../src/stubs.js';
import { runStream, synthStream } from './helpers.js';

/**
 * Acceptance: for seeded streams, a bindings-driven run with
 * stub-equivalent callables is byte-identical to the native stub run,
 * answers and snapshots both.
 */
describe('native/bindings parity', () => {
  const seeds = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];

  it.each(seeds)('seed %i reproduces the native run byte for byte', async (seed) => {
    const { events, config } = synthStream(seed, 120);

    const native = await BoundEngine.create(config);
    let nativeRun;
    try {
      nativeRun = await runStream(native, events);
    } finally {
      await native.close();
    }

    const bound = await BoundEngine.create(config);
    let boundRun;
    try {
      await bound.registerCallablePlugin('embedder', stubEmbedder(config.dimension ?? 384), {
        dimension: config.dimension ?? 384,
      });
      await bound.registerCallablePlugin(
        'generator',
        stubGenerator(config.plugins?.scene_keywords ?? {}),
      );
      boundRun = await runStream(bound, events);
    } finally {
      await bound.close();
    }

    expect(boundRun.answers).toEqual(nativeRun.answers);
    expect(boundRun.snapshot).toBe(nativeRun.snapshot);
  }, 120_000);
});
