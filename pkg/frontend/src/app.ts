/** Screen-by-screen controller: one active task per session, optimistic
 * submit with the service as the authority. A stale-task rejection
 * refreshes from the next-task endpoint, validation problems render
 * inline, and network failures park the judgment in the outbox.
 */

import {
  type ApiLike,
  NetworkError,
  ServiceError,
  type SessionInfo,
  type Submission,
  type Task,
} from "./api.js";
import { SubmitQueue } from "./queue.js";
import {
  renderDone,
  renderFatal,
  renderLogin,
  renderOffline,
  renderStep1,
  renderStep2,
  renderStep3,
  showProblems,
} from "./views.js";

export interface AppOptions {
  doc: Document;
  api: ApiLike;
  root?: HTMLElement;
}

export class App {
  readonly doc: Document;
  readonly api: ApiLike;
  private readonly main: HTMLElement;
  private readonly status: HTMLElement;
  private readonly queue: SubmitQueue<Submission>;
  private chain: Promise<void> = Promise.resolve();

  session: SessionInfo | null = null;
  task: Task | null = null;
  done = false;
  submitted = 0;

  constructor(options: AppOptions) {
    this.doc = options.doc;
    this.api = options.api;
    this.queue = new SubmitQueue(
      (body) => this.api.submit(this.session!.session_id, body).then(() => undefined),
      (err) => err instanceof NetworkError,
    );

    const root = options.root ?? this.doc.body;
    root.textContent = "";
    const title = this.doc.createElement("h1");
    title.textContent = "Response annotation";
    this.status = this.doc.createElement("span");
    this.status.className = "status";
    const header = this.doc.createElement("header");
    header.className = "frame";
    header.append(title, this.status);
    this.main = this.doc.createElement("main");
    root.append(header, this.main);
  }

  start(): void {
    this.show(renderLogin(this.doc, (token) => this.run(() => this.login(token))));
  }

  /** Resolves once every queued interaction has settled; tests await this. */
  idle(): Promise<void> {
    return this.chain;
  }

  loginWith(token: string): Promise<void> {
    this.run(() => this.login(token));
    return this.idle();
  }

  private run(work: () => Promise<void>): void {
    this.chain = this.chain.then(work).catch((err) => {
      this.show(renderFatal(this.doc, err instanceof Error ? err.message : String(err)));
    });
  }

  private show(view: HTMLElement): void {
    this.main.textContent = "";
    this.main.append(view);
  }

  private async login(token: string): Promise<void> {
    this.session = await this.api.openSession(token);
    this.status.textContent = `${this.session.annotator} on ${this.session.campaign_id}`;
    await this.advance();
  }

  private async advance(): Promise<void> {
    if (this.queue.size > 0) {
      try {
        this.submitted += await this.queue.flush();
      } catch (err) {
        // a queued judgment can go stale while we were offline; the
        // next-task fetch below re-serves the current version of it
        if (!(err instanceof ServiceError && err.kind === "stale_task")) throw err;
      }
      if (this.queue.size > 0) {
        this.showOffline();
        return;
      }
    }
    this.task = await this.api.nextTask(this.session!.session_id);
    if (this.task === null) {
      this.done = true;
      this.show(renderDone(this.doc, this.submitted));
      return;
    }
    this.done = false;
    this.renderTask(this.task);
  }

  private renderTask(task: Task): void {
    if (task.step === 1) {
      this.show(
        renderStep1(this.doc, task, (kept) =>
          this.run(() =>
            this.deliver({ step: 1, context_ref: task.context_ref, task_id: task.task_id, kept }),
          ),
        ),
      );
    } else if (task.step === 2) {
      this.show(
        renderStep2(this.doc, task, (top3) =>
          this.run(() =>
            this.deliver({ step: 2, context_ref: task.context_ref, task_id: task.task_id, top3 }),
          ),
        ),
      );
    } else {
      this.show(
        renderStep3(this.doc, task, (body) =>
          this.run(() =>
            this.deliver({
              step: 3,
              context_ref: task.context_ref,
              task_id: task.task_id,
              ...body,
            }),
          ),
        ),
      );
    }
  }

  private async deliver(submission: Submission): Promise<void> {
    try {
      if ((await this.queue.submit(submission.task_id, submission)) === "queued") {
        this.showOffline();
        return;
      }
    } catch (err) {
      if (err instanceof ServiceError && err.kind === "validation_failed") {
        const view = this.main.firstElementChild as HTMLElement | null;
        if (view) showProblems(view, err.problems.length > 0 ? err.problems : [err.message]);
        return;
      }
      if (err instanceof ServiceError && err.kind === "stale_task") {
        await this.advance();
        return;
      }
      throw err;
    }
    this.submitted += 1;
    await this.advance();
  }

  private showOffline(): void {
    this.show(renderOffline(this.doc, this.queue.size, () => this.run(() => this.advance())));
  }
}
