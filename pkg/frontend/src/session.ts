/**
 * Annotation session state machine, separated from the DOM so it can be
 * tested headlessly.
 *
 * Labeling is optimistic: the console advances to the next item immediately
 * and the decision is dispatched after a short undo window (or sooner, when
 * the next decision arrives or a flush forces it). Within that window
 * undo-last really undoes: nothing has been sent yet. Once a decision is
 * acknowledged by the server it is final here; corrections belong to the
 * later label audit.
 *
 * A 409 response means another annotator took the item: the optimistic
 * update is rolled back and the item is marked taken. A network failure
 * keeps the decision pending and surfaces a retry; nothing is lost silently.
 */

import { AnnotationApi, ApiError, LabelName, QueueItem, Subtype } from "./api.js";

export type PendingState = "waiting" | "sending" | "acked" | "taken" | "failed";

export interface PendingDecision {
  item: QueueItem;
  label: LabelName;
  subtype?: Subtype;
  state: PendingState;
  error?: string;
}

export interface CompletedDecision {
  item: QueueItem;
  label: LabelName;
  subtype?: Subtype;
  decisionsTotal: number;
}

export interface SessionCounts {
  position: number;
  total: number;
  submitted: number;
  taken: number;
  remaining: number;
}

export interface UndoResult {
  ok: boolean;
  reason?: string;
}

export class AnnotationSession {
  private items: QueueItem[] = [];
  private cursor = 0;
  private pending: PendingDecision | null = null;
  private pendingTimer: ReturnType<typeof setTimeout> | null = null;
  private dispatchChain: Promise<void> = Promise.resolve();
  readonly submitted: CompletedDecision[] = [];
  readonly takenIds = new Set<string>();
  /** decisions that failed on the network after being superseded; they block
      further labeling until retried, so nothing is ever dropped silently */
  readonly failures: PendingDecision[] = [];

  constructor(
    private readonly api: AnnotationApi,
    private readonly annotator: string,
    private readonly onChange: () => void = () => {},
    private readonly undoWindowMs = 4000,
  ) {}

  loadQueue(items: QueueItem[]): void {
    this.items = items.slice();
    this.cursor = 0;
    this.onChange();
  }

  current(): QueueItem | null {
    return this.cursor < this.items.length ? (this.items[this.cursor] ?? null) : null;
  }

  pendingDecision(): PendingDecision | null {
    return this.pending;
  }

  counts(): SessionCounts {
    return {
      position: Math.min(this.cursor, this.items.length),
      total: this.items.length,
      submitted: this.submitted.length,
      taken: this.takenIds.size,
      remaining: Math.max(this.items.length - this.cursor, 0),
    };
  }

  hasBlockingFailure(): boolean {
    return this.pending?.state === "failed" || this.failures.length > 0;
  }

  /** Record a decision for the current item and advance. */
  label(label: LabelName, subtype?: Subtype): boolean {
    const item = this.current();
    if (item === null) return false;
    if (this.hasBlockingFailure()) {
      return false; // failed decisions must be retried (or undone) first
    }
    if (this.pending && this.pending.state === "waiting") {
      this.dispatchNow(); // at most one undoable decision at a time
    }
    this.pending = { item, label, subtype, state: "waiting" };
    this.cursor += 1;
    this.pendingTimer = setTimeout(() => this.dispatchNow(), this.undoWindowMs);
    this.onChange();
    return true;
  }

  /** Undo the last decision if it has not been dispatched yet. */
  undoLast(): UndoResult {
    if (!this.pending) {
      return { ok: false, reason: "nothing to undo" };
    }
    if (this.pending.state !== "waiting" && this.pending.state !== "failed") {
      return { ok: false, reason: "already submitted" };
    }
    this.clearTimer();
    this.pending = null;
    this.cursor -= 1;
    this.onChange();
    return { ok: true };
  }

  /** Re-dispatch every decision that failed on the network. */
  retry(): void {
    for (const decision of this.failures.splice(0)) {
      decision.state = "sending";
      this.dispatchChain = this.dispatchChain.then(() => this.send(decision));
    }
    if (this.pending?.state === "failed") {
      this.pending.state = "waiting";
      this.dispatchNow();
    }
    this.onChange();
  }

  /** Force the pending decision out now and wait for every ack. */
  async flush(): Promise<void> {
    this.dispatchNow();
    await this.dispatchChain;
  }

  private clearTimer(): void {
    if (this.pendingTimer !== null) {
      clearTimeout(this.pendingTimer);
      this.pendingTimer = null;
    }
  }

  private dispatchNow(): void {
    const decision = this.pending;
    if (!decision || decision.state !== "waiting") return;
    this.clearTimer();
    decision.state = "sending";
    this.onChange();
    this.dispatchChain = this.dispatchChain.then(() => this.send(decision));
  }

  private async send(decision: PendingDecision): Promise<void> {
    try {
      const response = await this.api.label(decision.item.review_id, {
        label: decision.label,
        annotator: this.annotator,
        subtype: decision.subtype,
      });
      decision.state = "acked";
      this.submitted.push({
        item: decision.item,
        label: decision.label,
        subtype: decision.subtype,
        decisionsTotal: response.decisions_total,
      });
      if (this.pending === decision) this.pending = null;
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        // someone else labeled it first: roll the optimistic update back
        decision.state = "taken";
        this.takenIds.add(decision.item.review_id);
        if (this.pending === decision) this.pending = null;
      } else if (error instanceof ApiError && error.status === 404) {
        decision.state = "taken";
        this.takenIds.add(decision.item.review_id);
        if (this.pending === decision) this.pending = null;
      } else {
        decision.state = "failed";
        decision.error = error instanceof Error ? error.message : String(error);
        if (this.pending !== decision && !this.failures.includes(decision)) {
          this.failures.push(decision);
        }
      }
    }
    this.onChange();
  }
}
