/** Client-side mirrors of the service's submission rules, so the UI can
 * disable submit instead of bouncing off a 422. The server stays the
 * authority; these only have to agree with it on valid input.
 */

import type { Questionnaire } from "./api.js";

export function step2Problems(picked: readonly string[], listed: readonly string[]): string[] {
  const problems: string[] = [];
  const allowed = new Set(listed);
  const seen = new Set<string>();
  for (const rid of picked) {
    if (!allowed.has(rid)) problems.push(`${rid} is not one of your kept responses`);
    if (seen.has(rid)) problems.push(`${rid} picked more than once`);
    seen.add(rid);
  }
  if (picked.length !== 3) problems.push(`picked ${picked.length} of 3`);
  return problems;
}

export function step3Problems(
  ratings: Record<string, number>,
  questionnaire: Questionnaire,
): string[] {
  const problems: string[] = [];
  for (const q of questionnaire.questions) {
    const value = ratings[q.id];
    if (value === undefined) {
      problems.push(`${q.id} is unanswered`);
    } else if (!Number.isInteger(value) || value < q.scale_min || value > q.scale_max) {
      problems.push(`${q.id} must be a whole number from ${q.scale_min} to ${q.scale_max}`);
    }
  }
  return problems;
}
