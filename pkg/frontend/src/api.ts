/** Typed client for the yard API. fetch is injectable so the flow logic is
 * testable without a network and the e2e test can pass the real one. */

import type {
  ApiError,
  CreateProblemResponse,
  ProblemView,
  RuleDraft,
  SymbolHit,
  ValidationReport,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class YardApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: ApiError,
  ) {
    super(`${body.error}: ${body.message}`);
  }
}

export class ConnectionError extends Error {
  constructor(cause: unknown) {
    super(`cannot reach the service: ${String(cause)}`);
  }
}

export interface RuleSubmission {
  accepted: boolean;
  report: ValidationReport;
}

export class YardClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, init);
    } catch (cause) {
      throw new ConnectionError(cause);
    }
    if (response.status >= 400) {
      // surface the server's error taxonomy verbatim
      const body = (await response.json().catch(() => ({
        error: "E_HTTP",
        message: `status ${response.status}`,
      }))) as ApiError;
      throw new YardApiError(response.status, body);
    }
    return response;
  }

  private post(path: string, payload: unknown): Promise<Response> {
    return this.request(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  async createProblem(source: string): Promise<CreateProblemResponse> {
    const response = await this.post("/problems", { source });
    return (await response.json()) as CreateProblemResponse;
  }

  async getProblem(id: string): Promise<ProblemView> {
    const response = await this.request(`/problems/${id}`);
    return (await response.json()) as ProblemView;
  }

  async disambiguate(
    id: string,
    choices: Record<string, number>,
  ): Promise<{ id: string; state: string }> {
    const response = await this.post(`/problems/${id}/disambiguate`, { choices });
    return (await response.json()) as { id: string; state: string };
  }

  /** 422 keeps the validation report as a result, not an exception: the
   * editor renders it inline. */
  async submitRule(rule: RuleDraft): Promise<RuleSubmission> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + "/rules", {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ rule }),
      });
    } catch (cause) {
      throw new ConnectionError(cause);
    }
    if (response.status === 422) {
      const report = (await response.json()) as ValidationReport;
      return { accepted: false, report };
    }
    if (response.status >= 400) {
      const body = (await response.json()) as ApiError;
      throw new YardApiError(response.status, body);
    }
    const body = (await response.json()) as { report: ValidationReport };
    return { accepted: true, report: body.report };
  }

  async listRules(): Promise<RuleDraft[]> {
    const response = await this.request("/rules");
    const body = (await response.json()) as { rules: RuleDraft[] };
    return body.rules;
  }

  async searchSymbols(query: string): Promise<SymbolHit[]> {
    const response = await this.request(
      `/symbols?q=${encodeURIComponent(query)}`,
    );
    const body = (await response.json()) as { symbols: SymbolHit[] };
    return body.symbols;
  }
}
