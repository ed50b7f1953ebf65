/** DOM rendering for the three task screens plus the frame screens.
 *
 * Everything renders exactly what the service sent: response lists keep
 * the served order, the questionnaire comes from the task payload, and
 * nothing here knows what produced a response. Keyboard: arrows move
 * between responses, `k` keeps, `e` or `x` eliminates, digits toggle
 * step-2 picks and set step-3 ratings.
 */

import type { Step1Task, Step2Task, Step3Task, Question, TurnView } from "./api.js";
import {
  ACT_NAMES,
  ACT_TAGS,
  type ActTag,
  type Segment,
  defaultSegments,
  mergeWithNext,
  parseTagged,
  retag,
  serializeTagged,
  splitSegment,
} from "./tags.js";
import { step2Problems, step3Problems } from "./validate.js";

function el(
  doc: Document,
  tag: string,
  className = "",
  ...children: (Node | string)[]
): HTMLElement {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  for (const child of children) {
    node.append(typeof child === "string" ? doc.createTextNode(child) : child);
  }
  return node;
}

function renderContext(doc: Document, turns: TurnView[]): HTMLElement {
  const section = el(doc, "section", "context");
  for (const turn of turns) {
    section.append(
      el(doc, "p", "turn", el(doc, "strong", "speaker", `${turn.speaker}: `), turn.text),
    );
  }
  return section;
}

function taskHeader(doc: Document, title: string, practice: boolean): HTMLElement {
  const header = el(doc, "header", "", el(doc, "h2", "", title));
  if (practice) header.append(el(doc, "span", "practice", "practice"));
  return header;
}

/** Fill (or hide) the task screen's problem list; used for both client
 * validation and problems echoed back by the service. */
export function showProblems(root: HTMLElement, problems: string[]): void {
  const list = root.querySelector("ul.problems");
  if (!list) return;
  list.textContent = "";
  for (const problem of problems) {
    const item = root.ownerDocument.createElement("li");
    item.className = "problem";
    item.textContent = problem;
    list.append(item);
  }
  list.classList.toggle("visible", problems.length > 0);
}

export function renderLogin(doc: Document, onLogin: (token: string) => void): HTMLElement {
  const input = el(doc, "input", "token") as HTMLInputElement;
  input.type = "password";
  input.placeholder = "annotator token";
  const button = el(doc, "button", "enter", "start") as HTMLButtonElement;
  const go = () => {
    const token = input.value.trim();
    if (token) onLogin(token);
  };
  button.addEventListener("click", go);
  input.addEventListener("keydown", (event) => {
    if ((event as KeyboardEvent).key === "Enter") go();
  });
  return el(
    doc,
    "section",
    "login",
    el(doc, "h2", "", "Sign in"),
    el(doc, "p", "", "Paste the token you were given for this campaign."),
    input,
    button,
  );
}

function responseRows(
  doc: Document,
  list: HTMLElement,
  responses: { response_id: string; text: string }[],
): HTMLElement[] {
  return responses.map((response) => {
    const row = el(doc, "li", "response", el(doc, "p", "rtext", response.text));
    row.setAttribute("data-rid", response.response_id);
    row.tabIndex = 0;
    list.append(row);
    return row;
  });
}

function moveFocus(rows: HTMLElement[], from: Element | null, delta: number): void {
  const index = rows.findIndex((row) => row === from);
  const next = rows[index < 0 ? 0 : Math.min(rows.length - 1, Math.max(0, index + delta))];
  next?.focus();
}

export function renderStep1(
  doc: Document,
  task: Step1Task,
  onSubmit: (kept: Record<string, boolean>) => void,
): HTMLElement {
  const root = el(doc, "section", "task step1");
  root.append(taskHeader(doc, "Step 1: keep or eliminate", task.practice));

  const criteria = el(doc, "aside", "criteria", el(doc, "h3", "", "What to judge"));
  const definitions = el(doc, "dl", "");
  for (const [name, text] of Object.entries(task.criteria)) {
    definitions.append(el(doc, "dt", "", name), el(doc, "dd", "", text));
  }
  criteria.append(definitions);
  root.append(criteria, renderContext(doc, task.context_turns));

  const list = el(doc, "ol", "responses");
  const rows = responseRows(doc, list, task.responses);
  const decisions = new Map<string, boolean | null>(
    task.responses.map((response) => [response.response_id, null]),
  );

  const progress = el(doc, "span", "progress");
  const submit = el(doc, "button", "submit", "submit judgments") as HTMLButtonElement;

  const refresh = () => {
    const decided = [...decisions.values()].filter((d) => d !== null).length;
    progress.textContent = `decided ${decided} of ${decisions.size}`;
    submit.disabled = decided !== decisions.size;
  };

  const decide = (row: HTMLElement, keep: boolean) => {
    decisions.set(row.getAttribute("data-rid")!, keep);
    row.classList.toggle("kept", keep);
    row.classList.toggle("dropped", !keep);
    refresh();
  };

  for (const row of rows) {
    const keep = el(doc, "button", "keep", "keep (k)");
    const drop = el(doc, "button", "drop", "drop (e)");
    keep.addEventListener("click", () => decide(row, true));
    drop.addEventListener("click", () => decide(row, false));
    row.append(el(doc, "div", "controls", keep, drop));
  }

  root.addEventListener("keydown", (event) => {
    const key = (event as KeyboardEvent).key;
    const row = (event.target as Element | null)?.closest?.("li.response") as HTMLElement | null;
    if (!row) return;
    if (key === "k") decide(row, true);
    else if (key === "e" || key === "x") decide(row, false);
    else if (key === "ArrowDown") moveFocus(rows, row, 1);
    else if (key === "ArrowUp") moveFocus(rows, row, -1);
    else return;
    event.preventDefault();
    if (key === "k" || key === "e" || key === "x") moveFocus(rows, row, 1);
  });

  submit.addEventListener("click", () => {
    onSubmit(Object.fromEntries(decisions) as Record<string, boolean>);
  });

  refresh();
  root.append(list, el(doc, "footer", "", progress, el(doc, "ul", "problems"), submit));
  return root;
}

export function renderStep2(
  doc: Document,
  task: Step2Task,
  onSubmit: (top3: string[]) => void,
): HTMLElement {
  const root = el(doc, "section", "task step2");
  root.append(
    taskHeader(doc, `Step 2: pick your top ${task.pick}`, task.practice),
    renderContext(doc, task.context_turns),
  );

  const list = el(doc, "ol", "responses");
  const rows = responseRows(doc, list, task.responses);
  const listed = task.responses.map((response) => response.response_id);
  const picks: string[] = [];

  const progress = el(doc, "span", "progress");
  const submit = el(doc, "button", "submit", "submit picks") as HTMLButtonElement;

  const refresh = () => {
    progress.textContent = `picked ${picks.length} of ${task.pick}`;
    submit.disabled = step2Problems(picks, listed).length > 0;
    for (const row of rows) {
      row.classList.toggle("picked", picks.includes(row.getAttribute("data-rid")!));
    }
  };

  const toggle = (row: HTMLElement) => {
    const rid = row.getAttribute("data-rid")!;
    const at = picks.indexOf(rid);
    if (at >= 0) picks.splice(at, 1);
    else picks.push(rid);
    refresh();
  };

  for (const row of rows) {
    row.addEventListener("click", () => toggle(row));
  }

  root.addEventListener("keydown", (event) => {
    const key = (event as KeyboardEvent).key;
    const row = (event.target as Element | null)?.closest?.("li.response") as HTMLElement | null;
    if (key >= "1" && key <= "9" && rows[Number(key) - 1]) {
      toggle(rows[Number(key) - 1]);
    } else if (row && (key === " " || key === "p")) {
      toggle(row);
    } else if (row && key === "ArrowDown") {
      moveFocus(rows, row, 1);
    } else if (row && key === "ArrowUp") {
      moveFocus(rows, row, -1);
    } else {
      return;
    }
    event.preventDefault();
  });

  submit.addEventListener("click", () => onSubmit([...picks]));

  refresh();
  root.append(list, el(doc, "footer", "", progress, el(doc, "ul", "problems"), submit));
  return root;
}

function axisOrder(questions: Question[]): string[] {
  const axes: string[] = [];
  for (const question of questions) {
    if (!axes.includes(question.axis)) axes.push(question.axis);
  }
  return axes;
}

export function renderStep3(
  doc: Document,
  task: Step3Task,
  onSubmit: (body: { response_id: string; tagged_text: string; ratings: Record<string, number> }) => void,
): HTMLElement {
  const root = el(doc, "section", "task step3");
  root.append(
    taskHeader(doc, "Step 3: tag the acts and rate the response", task.practice),
    renderContext(doc, task.context_turns),
    el(doc, "blockquote", "response-text", task.response.text),
  );

  let segments: Segment[];
  try {
    segments = task.response.pretagged
      ? parseTagged(task.response.pretagged)
      : defaultSegments(task.response.text);
  } catch {
    segments = defaultSegments(task.response.text);
  }

  const editor = el(doc, "section", "editor", el(doc, "h3", "", "Act tags"));
  const segmentList = el(doc, "ol", "segments");
  editor.append(
    segmentList,
    el(doc, "p", "hint", "Split a segment at a character offset, join it with the next one, or change its act."),
  );

  const redraw = () => {
    segmentList.textContent = "";
    segments.forEach((segment, index) => {
      const row = el(doc, "li", "segment");
      row.setAttribute("data-seg", String(index));

      const select = el(doc, "select", "tag") as HTMLSelectElement;
      for (const tag of ACT_TAGS) {
        const option = doc.createElement("option") as HTMLOptionElement;
        option.value = tag;
        option.textContent = `${tag} ${ACT_NAMES[tag]}`;
        select.append(option);
      }
      select.value = segment.tag;
      select.addEventListener("change", () => {
        segments = retag(segments, index, select.value as ActTag);
        redraw();
      });

      const cut = el(doc, "input", "cut") as HTMLInputElement;
      cut.type = "number";
      cut.min = "1";
      cut.max = String(Math.max(1, segment.text.length - 1));
      cut.placeholder = "cut at";

      const split = el(doc, "button", "split", "split") as HTMLButtonElement;
      split.addEventListener("click", () => {
        const offset = Number.parseInt(cut.value, 10);
        if (Number.isInteger(offset)) {
          segments = splitSegment(segments, index, offset);
          redraw();
        }
      });

      const merge = el(doc, "button", "merge", "join next") as HTMLButtonElement;
      merge.disabled = index === segments.length - 1;
      merge.addEventListener("click", () => {
        segments = mergeWithNext(segments, index);
        redraw();
      });

      row.append(select, el(doc, "span", "segtext", segment.text), cut, split, merge);
      segmentList.append(row);
    });
  };
  redraw();

  const ratings: Record<string, number> = {};
  const form = el(doc, "section", "ratings");
  const submit = el(doc, "button", "submit", "submit rating") as HTMLButtonElement;
  const refresh = () => {
    submit.disabled = step3Problems(ratings, task.questionnaire).length > 0;
  };

  for (const axis of axisOrder(task.questionnaire.questions)) {
    const fieldset = el(doc, "fieldset", "axis", el(doc, "legend", "", axis));
    fieldset.setAttribute("data-axis", axis);
    for (const question of task.questionnaire.questions) {
      if (question.axis !== axis) continue;
      const block = el(doc, "div", "question", el(doc, "p", "qtext", question.text));
      block.setAttribute("data-qid", question.id);
      const scale = el(doc, "div", "scale");
      for (let value = question.scale_min; value <= question.scale_max; value += 1) {
        const radio = doc.createElement("input") as HTMLInputElement;
        radio.type = "radio";
        radio.name = question.id;
        radio.value = String(value);
        radio.addEventListener("change", () => {
          ratings[question.id] = value;
          refresh();
        });
        scale.append(el(doc, "label", "point", radio, String(value)));
      }
      block.append(scale);
      fieldset.append(block);
    }
    form.append(fieldset);
  }

  submit.addEventListener("click", () => {
    onSubmit({
      response_id: task.response.response_id,
      tagged_text: serializeTagged(segments),
      ratings: { ...ratings },
    });
  });

  refresh();
  root.append(editor, form, el(doc, "footer", "", el(doc, "ul", "problems"), submit));
  return root;
}

export function renderDone(doc: Document, submitted: number): HTMLElement {
  return el(
    doc,
    "section",
    "done",
    el(doc, "h2", "", "All tasks complete"),
    el(
      doc,
      "p",
      "",
      `You submitted ${submitted} judgment${submitted === 1 ? "" : "s"} this session. ` +
        "Progress lives on the server, so it is safe to close this tab.",
    ),
  );
}

export function renderOffline(doc: Document, size: number, onRetry: () => void): HTMLElement {
  const retry = el(doc, "button", "retry", "retry now") as HTMLButtonElement;
  retry.addEventListener("click", onRetry);
  return el(
    doc,
    "aside",
    "offline",
    el(
      doc,
      "p",
      "",
      `The service is unreachable. ${size} judgment${size === 1 ? " is" : "s are"} saved locally and will be retried.`,
    ),
    retry,
  );
}

export function renderFatal(doc: Document, message: string): HTMLElement {
  return el(doc, "section", "fatal", el(doc, "h2", "", "Something broke"), el(doc, "p", "", message));
}
