/**
 * Typed wrappers over the review service HTTP API. The base URL is a
 * parameter so tests can point these at a throwaway server.
 */

import { SampleRecord, UpdatePayload } from "./model.js";

export interface SampleSummary {
  id: string;
  status: string;
  revision: number;
  span_count: number;
}

export type SaveResult =
  | { kind: "saved"; newRevision: number }
  | { kind: "conflict"; expectedRevision: number; actualRevision: number }
  | { kind: "invalid"; violations: { code: string; message: string; span_index: number | null }[] }
  | { kind: "error"; message: string };

export async function listSamples(baseUrl: string): Promise<SampleSummary[]> {
  const response = await fetch(`${baseUrl}/samples`);
  if (!response.ok) throw new Error(`list failed: HTTP ${response.status}`);
  return (await response.json()) as SampleSummary[];
}

export async function getSample(baseUrl: string, id: string): Promise<SampleRecord> {
  const response = await fetch(`${baseUrl}/samples/${encodeURIComponent(id)}`);
  if (!response.ok) throw new Error(`load failed: HTTP ${response.status}`);
  return (await response.json()) as SampleRecord;
}

export async function putSample(
  baseUrl: string,
  id: string,
  payload: UpdatePayload,
  annotator: string,
): Promise<SaveResult> {
  let response: Response;
  try {
    response = await fetch(`${baseUrl}/samples/${encodeURIComponent(id)}`, {
      method: "PUT",
      headers: { "Content-Type": "application/json", "X-Annotator": annotator },
      body: JSON.stringify(payload),
    });
  } catch (err) {
    return { kind: "error", message: `network failure: ${String(err)}` };
  }
  if (response.status === 200) {
    const body = (await response.json()) as { new_revision: number };
    return { kind: "saved", newRevision: body.new_revision };
  }
  if (response.status === 409) {
    const body = (await response.json()) as {
      expected_revision: number;
      actual_revision: number;
    };
    return {
      kind: "conflict",
      expectedRevision: body.expected_revision,
      actualRevision: body.actual_revision,
    };
  }
  if (response.status === 400) {
    const body = (await response.json()) as {
      violations?: { code: string; message: string; span_index: number | null }[];
    };
    return { kind: "invalid", violations: body.violations ?? [] };
  }
  return { kind: "error", message: `save failed: HTTP ${response.status}` };
}
