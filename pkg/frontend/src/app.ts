/** DOM wiring. All state transitions live in flow.ts / ruleEditor.ts;
 * this file only reads inputs and renders FlowState snapshots. */

import { YardClient } from "./api.js";
import { classify, toHtml } from "./highlight.js";
import { FlowState, PropositionFlow, verdictViewModel } from "./flow.js";
import { RuleEditor, checkDraft, describeOutcome } from "./ruleEditor.js";
import type { RuleDraft } from "./types.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
};

function setupEditor(): HTMLTextAreaElement {
  const editor = $<HTMLTextAreaElement>("editor");
  const overlay = $<HTMLElement>("editor-overlay");
  const repaint = () => {
    overlay.innerHTML = toHtml(editor.value, classify(editor.value)) + "\n";
  };
  editor.addEventListener("input", repaint);
  editor.addEventListener("scroll", () => {
    overlay.scrollTop = editor.scrollTop;
    overlay.scrollLeft = editor.scrollLeft;
  });
  repaint();
  return editor;
}

function renderFlow(state: FlowState): void {
  const banner = $("banner");
  const chooser = $("chooser");
  const verdict = $("verdict");
  banner.hidden = state.phase !== "error";
  chooser.hidden = state.phase !== "choosing";
  if (state.phase === "error") {
    banner.textContent = state.banner;
  }
  if (state.phase === "submitting" || state.phase === "polling") {
    verdict.innerHTML = `<p class="muted">${
      state.phase === "submitting" ? "submitting…" : `waiting for engines (poll ${state.polls})…`
    }</p>`;
  }
  if (state.phase === "choosing") {
    chooser.innerHTML = "";
    for (const ambiguity of state.ambiguities) {
      const block = document.createElement("div");
      block.className = "ambiguity";
      const title = document.createElement("p");
      title.textContent = `Several readings for: ${ambiguity.sentence}`;
      block.appendChild(title);
      ambiguity.candidates.forEach((candidate, index) => {
        const label = document.createElement("label");
        const radio = document.createElement("input");
        radio.type = "radio";
        radio.name = `sentence-${ambiguity.sentence_index}`;
        radio.addEventListener("change", () => {
          flow.choose(ambiguity.sentence_index, index);
          $<HTMLButtonElement>("confirm-choices").disabled = !flow.choicesComplete;
        });
        label.appendChild(radio);
        const text = document.createElement("span");
        text.textContent = `${candidate.rendered.join(" ; ")}  ·  ${candidate.clauses.join(" ")}`;
        label.appendChild(text);
        block.appendChild(label);
      });
      chooser.appendChild(block);
    }
    const confirm = document.createElement("button");
    confirm.id = "confirm-choices";
    confirm.textContent = "Use selected readings";
    confirm.disabled = true;
    confirm.addEventListener("click", () => void flow.confirmChoices());
    chooser.appendChild(confirm);
  }
  if (state.phase === "resolved") {
    const model = verdictViewModel(state.view);
    const parts = [`<h3 class="verdict-${model.kind}">${model.kind}</h3>`];
    if (model.outlineLines.length) {
      parts.push(`<pre class="outline">${escapeHtml(model.outlineLines.join("\n"))}</pre>`);
    }
    if (model.relevant.length) {
      parts.push("<h4>pertinent facts</h4><ul>");
      for (const fact of model.relevant) {
        parts.push(
          `<li><code>${escapeHtml(fact.clauseId)}</code> ${escapeHtml(fact.rendered)}` +
            ` <code class="muted">${escapeHtml(fact.clause)}</code></li>`,
        );
      }
      parts.push("</ul>");
    }
    verdict.innerHTML = parts.join("");
  }
}

function escapeHtml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function readRuleDraft(): RuleDraft {
  return {
    id: $<HTMLInputElement>("rule-id").value,
    section: $<HTMLSelectElement>("rule-section").value as RuleDraft["section"],
    pattern: $<HTMLInputElement>("rule-pattern").value,
    template: $<HTMLInputElement>("rule-template").value,
    examples: $<HTMLTextAreaElement>("rule-examples").value.split("\n"),
  };
}

async function renderRuleList(editor: RuleEditor): Promise<void> {
  const query = $<HTMLInputElement>("rule-search").value;
  const rules = await editor.searchRules(query);
  $("rule-list").innerHTML = rules
    .map(
      (rule) =>
        `<li><code>${escapeHtml(rule.id)}</code> <span class="muted">${escapeHtml(
          rule.pattern,
        )}</span><br>→ <code>${escapeHtml(rule.template)}</code></li>`,
    )
    .join("");
}

const baseUrl = (window as { T2KU_BASE_URL?: string }).T2KU_BASE_URL ?? "";
const client = new YardClient(baseUrl);
const flow = new PropositionFlow(client);
const ruleEditor = new RuleEditor(client);

window.addEventListener("DOMContentLoaded", () => {
  const editor = setupEditor();
  flow.onChange(renderFlow);
  $("submit").addEventListener("click", () => void flow.submit(editor.value));

  $("rule-submit").addEventListener("click", async () => {
    const draft = readRuleDraft();
    const problems = checkDraft(draft);
    const reportEl = $("rule-report");
    if (problems.length) {
      reportEl.innerHTML = problems
        .map((p) => `<p class="bad">${escapeHtml(p.field)}: ${escapeHtml(p.message)}</p>`)
        .join("");
      return;
    }
    const result = await ruleEditor.submit(draft);
    const lines = (result.report?.examples ?? []).map(
      (o) =>
        `<li class="${o.status === "ok" ? "good" : "bad"}">${escapeHtml(
          o.example,
        )}: ${escapeHtml(describeOutcome(o))}</li>`,
    );
    reportEl.innerHTML =
      `<p class="${result.accepted ? "good" : "bad"}">` +
      `${result.accepted ? "rule accepted" : "rule rejected"}</p><ul>${lines.join("")}</ul>`;
    if (result.accepted) await renderRuleList(ruleEditor);
  });

  $("rule-search").addEventListener("input", () => void renderRuleList(ruleEditor));
  void renderRuleList(ruleEditor);
});
