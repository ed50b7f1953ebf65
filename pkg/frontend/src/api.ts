/** Typed client for the annotation service's v1 endpoints. */

export interface SessionInfo {
  session_id: string;
  annotator: string;
  campaign_id: string;
}

export interface TurnView {
  speaker: string;
  text: string;
}

export interface ResponseView {
  response_id: string;
  text: string;
}

export interface Question {
  id: string;
  text: string;
  axis: string;
  scale_min: number;
  scale_max: number;
}

export interface Questionnaire {
  questions: Question[];
}

interface TaskBase {
  task_id: string;
  context_ref: string;
  practice: boolean;
  context_turns: TurnView[];
}

export interface Step1Task extends TaskBase {
  step: 1;
  responses: ResponseView[];
  criteria: Record<string, string>;
}

export interface Step2Task extends TaskBase {
  step: 2;
  responses: ResponseView[];
  pick: number;
}

export interface Step3Task extends TaskBase {
  step: 3;
  response: { response_id: string; text: string; pretagged: string | null };
  questionnaire: Questionnaire;
}

export type Task = Step1Task | Step2Task | Step3Task;

export interface Step1Submission {
  step: 1;
  context_ref: string;
  task_id: string;
  kept: Record<string, boolean>;
}

export interface Step2Submission {
  step: 2;
  context_ref: string;
  task_id: string;
  top3: string[];
}

export interface Step3Submission {
  step: 3;
  context_ref: string;
  task_id: string;
  response_id: string;
  tagged_text: string;
  ratings: Record<string, number>;
}

export type Submission = Step1Submission | Step2Submission | Step3Submission;

export interface SubmitAck {
  ok: boolean;
  step: number;
  duplicate: boolean;
}

/** The service said no: carries its error kind and any per-field problems. */
export class ServiceError extends Error {
  constructor(
    readonly status: number,
    readonly kind: string,
    readonly problems: string[] = [],
    detail?: string,
  ) {
    super(detail || kind);
  }
}

/** The request never reached the service (offline, refused, aborted). */
export class NetworkError extends Error {}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** What the app needs from a session transport; Api is the real one. */
export interface ApiLike {
  openSession(token: string): Promise<SessionInfo>;
  nextTask(sessionId: string): Promise<Task | null>;
  submit(sessionId: string, submission: Submission): Promise<SubmitAck>;
}

export class Api implements ApiLike {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      throw new NetworkError(String(err));
    }
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      const detail = (body as { detail?: Record<string, unknown> }).detail ?? {};
      throw new ServiceError(
        response.status,
        String(detail.error ?? "unexpected"),
        Array.isArray(detail.problems) ? detail.problems.map(String) : [],
        typeof detail.detail === "string" ? detail.detail : undefined,
      );
    }
    return body;
  }

  private post(path: string, body: unknown): Promise<unknown> {
    return this.request(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  async openSession(token: string): Promise<SessionInfo> {
    return (await this.post("/v1/sessions", { token })) as SessionInfo;
  }

  /** The next open task for this session, or null when everything is done. */
  async nextTask(sessionId: string): Promise<Task | null> {
    try {
      return (await this.request(`/v1/sessions/${sessionId}/next`)) as Task;
    } catch (err) {
      if (err instanceof ServiceError && err.kind === "no_tasks_remaining") return null;
      throw err;
    }
  }

  async submit(sessionId: string, submission: Submission): Promise<SubmitAck> {
    return (await this.post(`/v1/sessions/${sessionId}/submit`, submission)) as SubmitAck;
  }
}
