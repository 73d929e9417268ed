/**
 * Wire types for the engine's stdio JSON-lines protocol and the
 * remote-plugin HTTP protocol. Mirrors the schemas documented by the
 * engine package; field names are fixed.
 */

export interface UtteranceEvent {
  type: 'utterance';
  turn: number;
  speaker: string;
  text: string;
}

export interface ProbeEvent {
  type: 'probe';
  turn: number;
  question: string;
  answer: string | null;
  keywords: string[];
  evidence_turns: number[];
}

export type StreamEvent = UtteranceEvent | ProbeEvent;

export interface ProbeResult {
  answer: string;
  latency_ms: number;
  context: string;
}

export interface EvidencePath {
  scene_id: number;
  event_id: number;
  amu_id: number;
  scene_label: string;
  event_label: string;
  amu_label: string;
  relations: Array<[string, number]>;
  score: number;
}

export interface ErrorBody {
  type: string;
  message: string;
}

export interface Response {
  ok: boolean;
  error?: ErrorBody;
  result?: ProbeResult | null;
  snapshot?: string;
  paths?: EvidencePath[];
  config?: EngineConfigDoc;
  registered?: string;
  op?: string;
}

/** Engine configuration document; all keys optional, defaults apply. */
export interface EngineConfigDoc {
  params?: Record<string, number>;
  dimension?: number;
  buffer_capacity?: number;
  leading_window_tokens?: number;
  k_scene?: number;
  k_event?: number;
  k_amu?: number;
  min_sim?: number;
  per_event_k?: boolean;
  flush_on_probe?: boolean;
  pass_order?: string[];
  plugins?: {
    embedder_kind?: string;
    embedder_endpoint?: string | null;
    generator_kind?: string;
    generator_endpoint?: string | null;
    extractor_kind?: string;
    transcriber_kind?: string;
    transcriber_endpoint?: string | null;
    model_name?: string;
    timeout?: number;
    retry?: number;
    scene_keywords?: Record<string, string>;
  };
}

/** Embedder callable: one vector (or raw counts; the engine normalizes). */
export type EmbedCallable = (texts: string[]) => number[][];

/** Generator callable: rendered prompt in, completion text out. */
export type GenerateCallable = (prompt: string) => string;
