import { describe, expect, it } from "vitest";

import { AnnotationApi, ApiError, LabelRequest, LabelResponse, QueueItem } from "../src/api.js";
import { AnnotationSession } from "../src/session.js";

function items(n: number): QueueItem[] {
  return Array.from({ length: n }, (_, i) => ({
    review_id: `r${i}`,
    dq_probability: 1 - i * 0.01,
    text: `review number ${i}`,
    product: null,
  }));
}

interface Call {
  reviewId: string;
  req: LabelRequest;
}

/** Scriptable stand-in for the HTTP client; records every label call. */
function fakeApi(
  handler: (reviewId: string, req: LabelRequest) => Promise<LabelResponse> | LabelResponse,
): { api: AnnotationApi; calls: Call[] } {
  const calls: Call[] = [];
  const api = {
    async label(reviewId: string, req: LabelRequest): Promise<LabelResponse> {
      calls.push({ reviewId, req });
      return handler(reviewId, req);
    },
  } as unknown as AnnotationApi;
  return { api, calls };
}

function okHandler(reviewId: string, req: LabelRequest): LabelResponse {
  return { review_id: reviewId, label: req.label, decisions_total: 1 };
}

describe("AnnotationSession", () => {
  it("advances optimistically and dispatches after the undo window", async () => {
    const { api, calls } = fakeApi(okHandler);
    const session = new AnnotationSession(api, "ann", () => {}, 5);
    session.loadQueue(items(3));
    expect(session.current()?.review_id).toBe("r0");

    expect(session.label("dual quality")).toBe(true);
    expect(session.current()?.review_id).toBe("r1"); // advanced immediately
    expect(calls.length).toBe(0); // not sent yet: undo window open

    await new Promise((resolve) => setTimeout(resolve, 30));
    expect(calls.length).toBe(1);
    expect(calls[0]).toMatchObject({ reviewId: "r0", req: { label: "dual quality" } });
    expect(session.submitted.length).toBe(1);
  });

  it("undo within the window cancels the dispatch entirely", async () => {
    const { api, calls } = fakeApi(okHandler);
    const session = new AnnotationSession(api, "ann", () => {}, 1000);
    session.loadQueue(items(2));
    session.label("standard");
    const undo = session.undoLast();
    expect(undo.ok).toBe(true);
    expect(session.current()?.review_id).toBe("r0"); // back on the same item
    await session.flush();
    expect(calls.length).toBe(0); // nothing was ever sent
    expect(session.submitted.length).toBe(0);
  });

  it("labeling the next item forces the previous decision out", async () => {
    const { api, calls } = fakeApi(okHandler);
    const session = new AnnotationSession(api, "ann", () => {}, 60_000);
    session.loadQueue(items(3));
    session.label("standard");
    session.label("dual quality");
    await session.flush();
    expect(calls.map((c) => c.reviewId)).toEqual(["r0", "r1"]);
    expect(session.submitted.length).toBe(2);
  });

  it("cannot undo an acknowledged decision", async () => {
    const { api } = fakeApi(okHandler);
    const session = new AnnotationSession(api, "ann", () => {}, 60_000);
    session.loadQueue(items(2));
    session.label("standard");
    await session.flush();
    const undo = session.undoLast();
    expect(undo.ok).toBe(false);
    expect(undo.reason).toMatch(/nothing to undo|already submitted/);
  });

  it("409 marks the item taken and rolls the decision back", async () => {
    const { api } = fakeApi(() => {
      throw new ApiError(409, "not queued");
    });
    const session = new AnnotationSession(api, "ann", () => {}, 5);
    session.loadQueue(items(2));
    session.label("dual quality");
    await session.flush();
    expect(session.takenIds.has("r0")).toBe(true);
    expect(session.submitted.length).toBe(0); // optimistic update rolled back
    expect(session.current()?.review_id).toBe("r1"); // skipped, not retried
    expect(session.hasBlockingFailure()).toBe(false);
  });

  it("network failure keeps the decision, blocks new labels, retry succeeds", async () => {
    let fail = true;
    const { api, calls } = fakeApi((reviewId, req) => {
      if (fail) throw new Error("connection refused");
      return okHandler(reviewId, req);
    });
    const session = new AnnotationSession(api, "ann", () => {}, 5);
    session.loadQueue(items(2));
    session.label("standard");
    await session.flush();
    expect(session.hasBlockingFailure()).toBe(true);
    expect(session.label("standard")).toBe(false); // blocked until retried

    fail = false;
    session.retry();
    await session.flush();
    expect(session.hasBlockingFailure()).toBe(false);
    expect(session.submitted.length).toBe(1);
    expect(calls.length).toBe(2); // original attempt + retry, same decision
    expect(calls[0]?.reviewId).toBe(calls[1]?.reviewId);
  });

  it("a superseded decision that fails is queued, never dropped", async () => {
    let failFirst = true;
    const { api } = fakeApi((reviewId, req) => {
      if (reviewId === "r0" && failFirst) {
        failFirst = false;
        throw new Error("boom");
      }
      return okHandler(reviewId, req);
    });
    const session = new AnnotationSession(api, "ann", () => {}, 60_000);
    session.loadQueue(items(3));
    session.label("standard"); // r0, will fail on dispatch
    session.label("standard"); // forces r0 out, r1 pending
    await session.flush();
    expect(session.failures.length + (session.hasBlockingFailure() ? 0 : 1)).toBeGreaterThan(0);
    expect(session.hasBlockingFailure()).toBe(true);
    session.retry();
    await session.flush();
    expect(session.submitted.map((d) => d.item.review_id).sort()).toEqual(["r0", "r1"]);
  });

  it("counts track the session", async () => {
    const { api } = fakeApi(okHandler);
    const session = new AnnotationSession(api, "ann", () => {}, 5);
    session.loadQueue(items(4));
    session.label("standard");
    session.label("dual quality");
    await session.flush();
    expect(session.counts()).toMatchObject({ total: 4, submitted: 2, remaining: 2, taken: 0 });
  });

  it("subtype travels with the decision", async () => {
    const { api, calls } = fakeApi(okHandler);
    const session = new AnnotationSession(api, "ann", () => {}, 5);
    session.loadQueue(items(1));
    session.label("other problems", { kind: "counterfeit", detail: null });
    await session.flush();
    expect(calls[0]?.req.subtype).toEqual({ kind: "counterfeit", detail: null });
  });
});
