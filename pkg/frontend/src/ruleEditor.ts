/** Bridge-rule editor flow: client-side draft checks, server validation,
 * and the searchable rule list. The server report is rendered as-is. */

import { YardClient } from "./api.js";
import type { ExampleOutcome, RuleDraft, ValidationReport } from "./types.js";

export interface DraftProblem {
  field: string;
  message: string;
}

/** Pre-submission checks; a draft failing these never reaches the server
 * (the zero-examples rule is a hard invariant of rule registration). */
export function checkDraft(draft: RuleDraft): DraftProblem[] {
  const problems: DraftProblem[] = [];
  if (!draft.id.trim()) {
    problems.push({ field: "id", message: "rule id is required" });
  }
  if (!draft.pattern.trim()) {
    problems.push({ field: "pattern", message: "pattern is required" });
  }
  if (!draft.template.trim()) {
    problems.push({ field: "template", message: "template is required" });
  }
  const examples = draft.examples.filter((e) => e.trim().length > 0);
  if (examples.length === 0) {
    problems.push({
      field: "examples",
      message: "at least one example sentence is required",
    });
  }
  return problems;
}

export interface RuleEditorResult {
  submitted: boolean;
  accepted: boolean;
  draftProblems: DraftProblem[];
  report: ValidationReport | null;
}

export class RuleEditor {
  constructor(private readonly client: YardClient) {}

  async submit(draft: RuleDraft): Promise<RuleEditorResult> {
    const draftProblems = checkDraft(draft);
    if (draftProblems.length > 0) {
      return { submitted: false, accepted: false, draftProblems, report: null };
    }
    const cleaned: RuleDraft = {
      ...draft,
      examples: draft.examples.filter((e) => e.trim().length > 0),
    };
    const outcome = await this.client.submitRule(cleaned);
    return {
      submitted: true,
      accepted: outcome.accepted,
      draftProblems: [],
      report: outcome.report,
    };
  }

  async searchRules(query: string): Promise<RuleDraft[]> {
    const rules = await this.client.listRules();
    const q = query.trim().toLowerCase();
    if (!q) return rules;
    return rules.filter(
      (rule) =>
        rule.id.toLowerCase().includes(q) ||
        rule.pattern.toLowerCase().includes(q) ||
        rule.template.toLowerCase().includes(q) ||
        rule.examples.some((e) => e.toLowerCase().includes(q)),
    );
  }
}

export function describeOutcome(outcome: ExampleOutcome): string {
  if (outcome.status === "ok") return "ok";
  if (outcome.status === "no_match") return "example does not match the rule";
  const clash = outcome.clashing_rule_id ? ` (clashes with ${outcome.clashing_rule_id})` : "";
  return `ambiguous against an existing rule${clash}`;
}
