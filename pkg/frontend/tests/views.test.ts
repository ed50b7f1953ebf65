import { describe, expect, it, vi } from "vitest";

import type { Step1Task, Step2Task, Step3Task } from "../src/api.js";
import {
  renderDone,
  renderLogin,
  renderStep1,
  renderStep2,
  renderStep3,
  showProblems,
} from "../src/views.js";

const TURNS = [
  { speaker: "A", text: "Good morning." },
  { speaker: "B", text: "Morning, how are you?" },
];

const STEP1: Step1Task = {
  task_id: "t-100",
  step: 1,
  context_ref: "c-0",
  practice: false,
  context_turns: TURNS,
  responses: [
    { response_id: "ra", text: "Answer a." },
    { response_id: "rb", text: "Answer b." },
    { response_id: "rc", text: "Answer c." },
    { response_id: "rd", text: "Answer d." },
  ],
  criteria: {
    consistency: "Keep only responses that fit this conversation.",
    specificity: "Prefer responses specific to this conversation.",
  },
};

const STEP2: Step2Task = {
  task_id: "t-200",
  step: 2,
  context_ref: "c-0",
  practice: false,
  context_turns: TURNS,
  responses: STEP1.responses.slice(0, 4),
  pick: 3,
};

const STEP3: Step3Task = {
  task_id: "t-300",
  step: 3,
  context_ref: "c-0",
  practice: true,
  context_turns: TURNS,
  response: {
    response_id: "ra",
    text: "Hi Suzy, it's me. How have you been? I was worried.",
    pretagged: "<I>Hi Suzy, it's me.</I><Q>How have you been?</Q><I>I was worried.</I>",
  },
  questionnaire: {
    questions: [
      { id: "useful", text: "Useful?", axis: "logical", scale_min: 1, scale_max: 5 },
      { id: "fluency", text: "Fluent?", axis: "logical", scale_min: 1, scale_max: 5 },
      { id: "tone", text: "Right tone?", axis: "emotional", scale_min: 1, scale_max: 5 },
    ],
  },
};

function rows(root: HTMLElement): HTMLElement[] {
  return [...root.querySelectorAll("li.response")] as HTMLElement[];
}

function submitButton(root: HTMLElement): HTMLButtonElement {
  return root.querySelector("button.submit") as HTMLButtonElement;
}

function key(target: HTMLElement, key: string): void {
  target.dispatchEvent(new KeyboardEvent("keydown", { key, bubbles: true }));
}

describe("step 1 screen", () => {
  it("shows every response, the context, and the criteria help", () => {
    const root = renderStep1(document, STEP1, () => {});
    expect(rows(root)).toHaveLength(4);
    expect(root.textContent).toContain("Good morning.");
    expect(root.textContent).toContain("Keep only responses that fit this conversation.");
    expect(root.textContent).toContain("Prefer responses specific to this conversation.");
  });

  it("keeps submit disabled until every response is decided", () => {
    const onSubmit = vi.fn();
    const root = renderStep1(document, STEP1, onSubmit);
    document.body.append(root);
    const submit = submitButton(root);
    expect(submit.disabled).toBe(true);
    expect(root.textContent).toContain("decided 0 of 4");

    const [a, b, c, d] = rows(root);
    (a.querySelector("button.keep") as HTMLElement).click();
    (b.querySelector("button.drop") as HTMLElement).click();
    (c.querySelector("button.keep") as HTMLElement).click();
    expect(submit.disabled).toBe(true);
    expect(root.textContent).toContain("decided 3 of 4");

    (d.querySelector("button.keep") as HTMLElement).click();
    expect(submit.disabled).toBe(false);
    submit.click();
    expect(onSubmit).toHaveBeenCalledWith({ ra: true, rb: false, rc: true, rd: true });
    root.remove();
  });

  it("supports keep and eliminate from the keyboard", () => {
    const onSubmit = vi.fn();
    const root = renderStep1(document, STEP1, onSubmit);
    document.body.append(root);
    const [a, b] = rows(root);

    a.focus();
    key(a, "e");
    expect(a.classList.contains("dropped")).toBe(true);
    expect(document.activeElement).toBe(b);
    key(b, "k");
    expect(b.classList.contains("kept")).toBe(true);

    key(rows(root)[2], "k");
    key(rows(root)[3], "k");
    submitButton(root).click();
    expect(onSubmit).toHaveBeenCalledWith({ ra: false, rb: true, rc: true, rd: true });
    root.remove();
  });

  it("marks practice tasks", () => {
    const root = renderStep1(document, { ...STEP1, practice: true }, () => {});
    expect(root.querySelector(".practice")).not.toBeNull();
  });
});

describe("step 2 screen", () => {
  it("disables submit away from exactly three picks, with a count indicator", () => {
    const onSubmit = vi.fn();
    const root = renderStep2(document, STEP2, onSubmit);
    const submit = submitButton(root);
    const [a, b, c, d] = rows(root);

    expect(submit.disabled).toBe(true);
    a.click();
    b.click();
    expect(root.textContent).toContain("picked 2 of 3");
    expect(submit.disabled).toBe(true);

    c.click();
    expect(root.textContent).toContain("picked 3 of 3");
    expect(submit.disabled).toBe(false);

    d.click();
    expect(root.textContent).toContain("picked 4 of 3");
    expect(submit.disabled).toBe(true);

    d.click();
    submit.click();
    expect(onSubmit).toHaveBeenCalledWith(["ra", "rb", "rc"]);
  });

  it("preserves pick order and toggles picks from the keyboard", () => {
    const onSubmit = vi.fn();
    const root = renderStep2(document, STEP2, onSubmit);
    document.body.append(root);
    const all = rows(root);

    key(all[0], "3");
    key(all[0], "1");
    key(all[0], "4");
    expect(all[2].classList.contains("picked")).toBe(true);
    submitButton(root).click();
    expect(onSubmit).toHaveBeenCalledWith(["rc", "ra", "rd"]);
    root.remove();
  });
});

describe("step 3 screen", () => {
  it("renders the pretagged segments", () => {
    const root = renderStep3(document, STEP3, () => {});
    const segments = [...root.querySelectorAll("li.segment")];
    expect(segments).toHaveLength(3);
    const tags = segments.map((s) => (s.querySelector("select.tag") as HTMLSelectElement).value);
    expect(tags).toEqual(["I", "Q", "I"]);
  });

  it("falls back to one inform segment without pretagging", () => {
    const task = { ...STEP3, response: { ...STEP3.response, pretagged: null } };
    const root = renderStep3(document, task, () => {});
    const segments = [...root.querySelectorAll("li.segment")];
    expect(segments).toHaveLength(1);
    expect(segments[0].textContent).toContain(task.response.text);
  });

  it("groups questions by axis in first-appearance order", () => {
    const root = renderStep3(document, STEP3, () => {});
    const axes = [...root.querySelectorAll("fieldset.axis")].map((f) => f.getAttribute("data-axis"));
    expect(axes).toEqual(["logical", "emotional"]);
    const logical = root.querySelector('fieldset[data-axis="logical"]')!;
    expect(logical.querySelectorAll(".question")).toHaveLength(2);
  });

  it("gates submit on a complete rating and reports edited tags", () => {
    const onSubmit = vi.fn();
    const root = renderStep3(document, STEP3, onSubmit);
    document.body.append(root);
    const submit = submitButton(root);
    expect(submit.disabled).toBe(true);

    for (const qid of ["useful", "fluency", "tone"]) {
      const radio = root.querySelector(
        `div[data-qid="${qid}"] input[value="4"]`,
      ) as HTMLInputElement;
      radio.click();
    }
    expect(submit.disabled).toBe(false);

    const second = root.querySelectorAll("li.segment")[1]!;
    (second.querySelector("select.tag") as HTMLSelectElement).value = "D";
    second
      .querySelector("select.tag")!
      .dispatchEvent(new Event("change", { bubbles: true }));

    submit.click();
    expect(onSubmit).toHaveBeenCalledWith({
      response_id: "ra",
      tagged_text: "<I>Hi Suzy, it's me.</I><D>How have you been?</D><I>I was worried.</I>",
      ratings: { useful: 4, fluency: 4, tone: 4 },
    });
    root.remove();
  });

  it("splits and merges segments through the editor controls", () => {
    const task = { ...STEP3, response: { ...STEP3.response, pretagged: null } };
    const onSubmit = vi.fn();
    const root = renderStep3(document, task, onSubmit);

    const first = root.querySelector("li.segment")!;
    (first.querySelector("input.cut") as HTMLInputElement).value = "17";
    (first.querySelector("button.split") as HTMLElement).click();
    expect(root.querySelectorAll("li.segment")).toHaveLength(2);

    const head = root.querySelector("li.segment")!;
    expect(head.querySelector("span.segtext")!.textContent).toBe("Hi Suzy, it's me.");
    (head.querySelector("button.merge") as HTMLElement).click();
    expect(root.querySelectorAll("li.segment")).toHaveLength(1);
  });
});

describe("frame screens", () => {
  it("login hands over the trimmed token", () => {
    const onLogin = vi.fn();
    const root = renderLogin(document, onLogin);
    const input = root.querySelector("input.token") as HTMLInputElement;
    input.value = "  tok123  ";
    (root.querySelector("button.enter") as HTMLElement).click();
    expect(onLogin).toHaveBeenCalledWith("tok123");
  });

  it("login ignores an empty token", () => {
    const onLogin = vi.fn();
    const root = renderLogin(document, onLogin);
    (root.querySelector("button.enter") as HTMLElement).click();
    expect(onLogin).not.toHaveBeenCalled();
  });

  it("problem lists are injected into the current screen", () => {
    const root = renderStep2(document, STEP2, () => {});
    showProblems(root, ["picked 2 of 3"]);
    const list = root.querySelector("ul.problems")!;
    expect(list.classList.contains("visible")).toBe(true);
    expect(list.textContent).toContain("picked 2 of 3");
    showProblems(root, []);
    expect(list.classList.contains("visible")).toBe(false);
  });

  it("the completion screen reports the session count", () => {
    expect(renderDone(document, 7).textContent).toContain("7 judgments");
  });
});
