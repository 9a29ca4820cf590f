/** Wire types for the yard HTTP API. Field names mirror the server JSON
 * exactly; the UI never reshapes server strings. */

export interface Candidate {
  rule_id: string;
  clauses: string[];
  rendered: string[];
}

export interface SentenceAmbiguity {
  sentence_index: number;
  sentence: string;
  candidates: Candidate[];
}

export interface CreateProblemResponse {
  id: string;
  state: string;
  ambiguities?: SentenceAmbiguity[];
}

export interface VerdictWire {
  kind: "proved" | "inconsistent" | "unknown";
  proof?: unknown;
  relevant?: string[];
  budget_exhausted: boolean;
  stats: Record<string, unknown>;
}

export interface RelevantRendered {
  clause_id: string;
  clause: string;
  rendered: string;
}

export interface ProblemView {
  id: string;
  source: string;
  state: string;
  created_at: number;
  resolved_at: number | null;
  choices: Record<string, number>;
  ambiguities?: SentenceAmbiguity[];
  verdict?: VerdictWire;
  outline?: string;
  relevant_rendered?: RelevantRendered[];
}

export interface ApiError {
  error: string;
  message: string;
  details?: Record<string, unknown>;
}

export interface RuleDraft {
  id: string;
  section: "declaration" | "premise" | "conclusion" | "any";
  pattern: string;
  template: string;
  span_subpatterns?: Record<string, string>;
  examples: string[];
  reverse?: { clause_pattern: string; sentence_template: string };
}

export interface ExampleOutcome {
  example: string;
  status: "ok" | "no_match" | "ambiguous";
  error?: string;
  clashing_rule_id?: string;
}

export interface ValidationReport {
  accepted: boolean;
  examples: ExampleOutcome[];
}

export interface SymbolHit {
  identifier: string;
  kind: string;
  arity: number | null;
  doc: string;
  neighbors: string[];
}
