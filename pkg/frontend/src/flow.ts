/** The proposition flow: submit, resolve ambiguities, poll to a verdict.
 *
 * Pure state machine over the injected client; the DOM layer only renders
 * the current PropositionFlowState. Every clause and outline string in the
 * state is byte-identical to a server response field.
 */

import { ConnectionError, YardApiError, YardClient } from "./api.js";
import type { ProblemView, SentenceAmbiguity } from "./types.js";

export type FlowState =
  | { phase: "idle" }
  | { phase: "submitting" }
  | {
      phase: "choosing";
      problemId: string;
      ambiguities: SentenceAmbiguity[];
      selected: Record<number, number>;
    }
  | { phase: "polling"; problemId: string; polls: number }
  | { phase: "resolved"; problemId: string; view: ProblemView }
  | { phase: "error"; banner: string; code: string | null; sourcePreserved: true };

export interface FlowOptions {
  /** base poll interval in ms; backoff multiplies it, capped */
  pollIntervalMs?: number;
  pollCapMs?: number;
  maxPolls?: number;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export class PropositionFlow {
  state: FlowState = { phase: "idle" };
  private listeners: Array<(s: FlowState) => void> = [];
  private readonly pollIntervalMs: number;
  private readonly pollCapMs: number;
  private readonly maxPolls: number;
  private readonly sleep: (ms: number) => Promise<void>;

  constructor(
    private readonly client: YardClient,
    options: FlowOptions = {},
  ) {
    this.pollIntervalMs = options.pollIntervalMs ?? 1000;
    this.pollCapMs = options.pollCapMs ?? 5000;
    this.maxPolls = options.maxPolls ?? 300;
    this.sleep = options.sleep ?? defaultSleep;
  }

  onChange(listener: (s: FlowState) => void): void {
    this.listeners.push(listener);
  }

  private setState(state: FlowState): void {
    this.state = state;
    for (const listener of this.listeners) listener(state);
  }

  private fail(error: unknown): void {
    if (error instanceof YardApiError) {
      this.setState({
        phase: "error",
        banner: `${error.body.error}: ${error.body.message}`,
        code: error.body.error,
        sourcePreserved: true,
      });
      return;
    }
    if (error instanceof ConnectionError) {
      this.setState({
        phase: "error",
        banner: error.message,
        code: null,
        sourcePreserved: true,
      });
      return;
    }
    throw error;
  }

  /** POST the source; land in "choosing" when the server reports
   * ambiguities, otherwise go straight to polling. */
  async submit(source: string): Promise<FlowState> {
    this.setState({ phase: "submitting" });
    try {
      const created = await this.client.createProblem(source);
      if (created.state === "needs_disambiguation" && created.ambiguities?.length) {
        this.setState({
          phase: "choosing",
          problemId: created.id,
          ambiguities: created.ambiguities,
          selected: {},
        });
        return this.state;
      }
      return await this.pollUntilResolved(created.id);
    } catch (error) {
      this.fail(error);
      return this.state;
    }
  }

  /** Record one candidate choice; selections only exist for sentences the
   * server marked ambiguous. */
  choose(sentenceIndex: number, candidateIndex: number): void {
    if (this.state.phase !== "choosing") {
      throw new Error("not choosing");
    }
    const ambiguity = this.state.ambiguities.find(
      (a) => a.sentence_index === sentenceIndex,
    );
    if (!ambiguity) {
      throw new Error(`sentence ${sentenceIndex} is not ambiguous`);
    }
    if (candidateIndex < 0 || candidateIndex >= ambiguity.candidates.length) {
      throw new Error(`candidate ${candidateIndex} out of range`);
    }
    this.state.selected[sentenceIndex] = candidateIndex;
  }

  get choicesComplete(): boolean {
    if (this.state.phase !== "choosing") return false;
    return this.state.ambiguities.every(
      (a) => this.state.phase === "choosing" && a.sentence_index in this.state.selected,
    );
  }

  async confirmChoices(): Promise<FlowState> {
    if (this.state.phase !== "choosing") {
      throw new Error("not choosing");
    }
    const { problemId, selected } = this.state;
    const choices: Record<string, number> = {};
    for (const [index, candidate] of Object.entries(selected)) {
      choices[index] = candidate;
    }
    try {
      await this.client.disambiguate(problemId, choices);
      return await this.pollUntilResolved(problemId);
    } catch (error) {
      this.fail(error);
      return this.state;
    }
  }

  private async pollUntilResolved(problemId: string): Promise<FlowState> {
    let interval = this.pollIntervalMs;
    for (let polls = 1; polls <= this.maxPolls; polls++) {
      this.setState({ phase: "polling", problemId, polls });
      const view = await this.client.getProblem(problemId);
      if (view.state === "resolved") {
        this.setState({ phase: "resolved", problemId, view });
        return this.state;
      }
      await this.sleep(interval);
      interval = Math.min(interval * 1.25, this.pollCapMs);
    }
    this.fail(new ConnectionError("gave up polling"));
    return this.state;
  }
}

/** What the verdict pane shows; strings taken verbatim from the view. */
export interface VerdictViewModel {
  kind: string;
  outlineLines: string[];
  relevant: Array<{ clauseId: string; clause: string; rendered: string }>;
}

export function verdictViewModel(view: ProblemView): VerdictViewModel {
  return {
    kind: view.verdict?.kind ?? "unknown",
    outlineLines: view.outline ? view.outline.split("\n") : [],
    relevant: (view.relevant_rendered ?? []).map((r) => ({
      clauseId: r.clause_id,
      clause: r.clause,
      rendered: r.rendered,
    })),
  };
}
