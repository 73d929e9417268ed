export { BoundEngine, EngineError } from './engine.js';
export { PluginHost } from './pluginHost.js';
export { stubEmbedder, stubGenerator, trigramCounts } from './stubs.js';
export type {
  EmbedCallable,
  EngineConfigDoc,
  EvidencePath,
  GenerateCallable,
  ProbeEvent,
  ProbeResult,
  Response,
  StreamEvent,
  UtteranceEvent,
} from './protocol.js';
