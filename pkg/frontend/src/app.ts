/**
 * The annotator console: queue card with one-keystroke labeling, subtype
 * taxonomy for other-problems verdicts, undo within the dispatch window, an
 * iteration dashboard and the product rollup. Pure DOM, no framework; all
 * review text is inserted via textContent.
 */

import { AnnotationApi, IterationRecord, RollupRow, Subtype, UiConfig } from "./api.js";
import { AnnotationSession } from "./session.js";

type ViewName = "queue" | "iterations" | "products";

const LABEL_KEYS: Record<string, number> = { "1": 0, "2": 1, "3": 2 };

export class AnnotatorApp {
  readonly session: AnnotationSession;
  private view: ViewName = "queue";
  private subtypePanelOpen = false;
  private chosenSubtype: string | null = null;
  private notice = "";
  private iterations: IterationRecord[] = [];
  private rollup: RollupRow[] = [];
  private queueIteration: number | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: AnnotationApi,
    private readonly config: UiConfig,
    private readonly annotator: string,
    undoWindowMs = 4000,
  ) {
    this.session = new AnnotationSession(api, annotator, () => this.render(), undoWindowMs);
    this.root.addEventListener("keydown", (event) => this.onKey(event as KeyboardEvent));
  }

  async start(): Promise<void> {
    await this.refreshQueue();
  }

  async refreshQueue(): Promise<void> {
    const queue = await this.api.queue();
    this.queueIteration = queue.iteration;
    this.session.loadQueue(queue.items);
    this.render();
  }

  async showView(view: ViewName): Promise<void> {
    this.view = view;
    if (view === "iterations") {
      this.iterations = await this.api.iterations();
    } else if (view === "products") {
      this.rollup = await this.api.rollup();
    }
    this.render();
  }

  /** Flush the pending decision (used on page hide and by tests). */
  flush(): Promise<void> {
    return this.session.flush();
  }

  private onKey(event: KeyboardEvent): void {
    if (this.view !== "queue") return;
    const target = event.target as HTMLElement | null;
    if (target && target.tagName === "INPUT") return;
    if (this.subtypePanelOpen) {
      const index = Number(event.key) - 1;
      if (!Number.isNaN(index) && index >= 0 && index < this.config.subtypes.length) {
        this.chosenSubtype = this.config.subtypes[index] ?? null;
        this.render();
      } else if (event.key === "Enter") {
        this.confirmOtherProblems();
      } else if (event.key === "Escape") {
        this.closeSubtypePanel();
      }
      return;
    }
    if (event.key in LABEL_KEYS) {
      this.pickLabel(LABEL_KEYS[event.key] ?? 0);
    } else if (event.key === "u") {
      this.undo();
    }
  }

  private pickLabel(index: number): void {
    const label = this.config.labels[index];
    if (!label || this.session.current() === null) return;
    if (label === "other problems") {
      this.subtypePanelOpen = true;
      this.chosenSubtype = null;
      this.notice = "";
      this.render();
      return;
    }
    this.submit(label, undefined);
  }

  private confirmOtherProblems(): void {
    const detailInput = this.root.querySelector<HTMLInputElement>("#subtype-detail");
    const subtype: Subtype | undefined = this.chosenSubtype
      ? { kind: this.chosenSubtype, detail: detailInput?.value.trim() || null }
      : undefined;
    this.closeSubtypePanel();
    this.submit("other problems", subtype);
  }

  private closeSubtypePanel(): void {
    this.subtypePanelOpen = false;
    this.chosenSubtype = null;
    this.render();
  }

  private submit(label: UiConfig["labels"][number], subtype: Subtype | undefined): void {
    const accepted = this.session.label(label, subtype);
    this.notice = accepted ? "" : "resolve the failed submission first";
    this.render();
  }

  private undo(): void {
    const result = this.session.undoLast();
    this.notice = result.ok ? "decision undone" : `cannot undo: ${result.reason}`;
    this.render();
  }

  // -- rendering ------------------------------------------------------------

  private render(): void {
    this.root.textContent = "";
    this.root.append(this.renderHeader());
    if (this.view === "queue") {
      this.root.append(this.renderQueue());
    } else if (this.view === "iterations") {
      this.root.append(this.renderIterations());
    } else {
      this.root.append(this.renderRollup());
    }
  }

  private el<K extends keyof HTMLElementTagNameMap>(
    tag: K, attrs: Record<string, string> = {}, text?: string,
  ): HTMLElementTagNameMap[K] {
    const node = document.createElement(tag);
    for (const [key, value] of Object.entries(attrs)) {
      node.setAttribute(key, value);
    }
    if (text !== undefined) node.textContent = text;
    return node;
  }

  private renderHeader(): HTMLElement {
    const counts = this.session.counts();
    const header = this.el("header", { class: "topbar" });
    header.append(this.el("h1", {}, "Review annotation"));
    const status = this.el("div", { id: "session-counts", class: "counts" },
      `batch ${this.queueIteration ?? "-"} · ${counts.submitted} labeled · ` +
      `${counts.taken} taken · ${counts.remaining} remaining`);
    header.append(status);
    const nav = this.el("nav", {});
    for (const [view, title] of [["queue", "Queue"], ["iterations", "Iterations"],
                                 ["products", "Products"]] as [ViewName, string][]) {
      const button = this.el("button", { "data-view": view, class: view === this.view ? "active" : "" }, title);
      button.addEventListener("click", () => void this.showView(view));
      nav.append(button);
    }
    header.append(nav);
    return header;
  }

  private renderQueue(): HTMLElement {
    const main = this.el("main", { id: "view-queue" });
    const pending = this.session.pendingDecision();
    const blocked = this.session.hasBlockingFailure();

    if (blocked) {
      const banner = this.el("div", { id: "banner", class: "banner error" },
        "submission failed: check the connection and retry");
      const retry = this.el("button", { id: "retry-btn" }, "Retry");
      retry.addEventListener("click", () => this.session.retry());
      banner.append(retry);
      main.append(banner);
    } else if (this.session.takenIds.size > 0 && pending === null) {
      main.append(this.el("div", { id: "taken-note", class: "banner muted" },
        `${this.session.takenIds.size} item(s) taken by another annotator and skipped`));
    }
    if (this.notice) {
      main.append(this.el("div", { id: "notice", class: "banner muted" }, this.notice));
    }

    const item = this.session.current();
    if (item === null) {
      const done = this.el("div", { id: "queue-done", class: "card" },
        "Queue finished. Run the next iteration to get a new batch.");
      const refresh = this.el("button", { id: "refresh-btn" }, "Refresh queue");
      refresh.addEventListener("click", () => void this.refreshQueue());
      done.append(refresh);
      main.append(done);
      return main;
    }

    const counts = this.session.counts();
    const card = this.el("article", { class: "card", id: "review-card" });
    card.append(this.el("div", { id: "queue-position", class: "meta" },
      `item ${counts.position + 1} of ${counts.total}`));
    card.append(this.el("div", { id: "review-meta", class: "meta" },
      `p(dual quality) ${item.dq_probability.toFixed(3)}` +
      (item.product ? ` · product ${item.product}` : "") + ` · ${item.review_id}`));
    card.append(this.el("p", { id: "review-text" }, item.text));
    main.append(card);

    const buttons = this.el("div", { class: "label-buttons" });
    this.config.labels.forEach((label, index) => {
      const button = this.el("button", { class: "label-btn", "data-label": label },
        `${index + 1} · ${label}`);
      button.addEventListener("click", () => this.pickLabel(index));
      buttons.append(button);
    });
    const undoButton = this.el("button", { id: "undo-btn", disabled: pending?.state === "waiting" ? "" : "disabled" }, "u · undo last");
    if (pending?.state === "waiting") undoButton.removeAttribute("disabled");
    undoButton.addEventListener("click", () => this.undo());
    buttons.append(undoButton);
    main.append(buttons);

    if (this.subtypePanelOpen) {
      main.append(this.renderSubtypePanel());
    }
    return main;
  }

  private renderSubtypePanel(): HTMLElement {
    const panel = this.el("div", { id: "subtype-panel", class: "card" });
    panel.append(this.el("div", { class: "meta" },
      "problem subtype (digit to pick, Enter to confirm, Esc to cancel)"));
    const list = this.el("div", { class: "subtype-list" });
    this.config.subtypes.forEach((kind, index) => {
      const option = this.el("button", {
        class: "subtype-option" + (kind === this.chosenSubtype ? " chosen" : ""),
        "data-kind": kind,
      }, `${index + 1} · ${kind}`);
      option.addEventListener("click", () => {
        this.chosenSubtype = kind;
        this.render();
      });
      list.append(option);
    });
    panel.append(list);
    panel.append(this.el("input", {
      id: "subtype-detail", type: "text",
      placeholder: "free-text detail (used with 'other')",
    }));
    const confirm = this.el("button", { id: "subtype-confirm" }, "Confirm other problems");
    confirm.addEventListener("click", () => this.confirmOtherProblems());
    const cancel = this.el("button", { id: "subtype-cancel" }, "Cancel");
    cancel.addEventListener("click", () => this.closeSubtypePanel());
    panel.append(confirm, cancel);
    return panel;
  }

  private renderIterations(): HTMLElement {
    const main = this.el("main", { id: "view-iterations" });
    if (this.iterations.length === 0) {
      main.append(this.el("p", { class: "muted" }, "no iterations yet"));
      return main;
    }
    const table = this.el("table", { id: "iterations-table" });
    const head = this.el("tr", {});
    for (const title of ["#", "pool scored", "batch", "decisions", "labeled total"]) {
      head.append(this.el("th", {}, title));
    }
    table.append(head);
    for (const record of this.iterations) {
      const row = this.el("tr", { "data-iteration": String(record.iteration) });
      row.append(this.el("td", {}, String(record.iteration)));
      row.append(this.el("td", {}, String(record.pool_scored)));
      row.append(this.el("td", {}, String(record.batch_size)));
      row.append(this.el("td", { class: "decisions" }, String(record.decisions_ingested)));
      row.append(this.el("td", {}, String(record.labeled_size)));
      table.append(row);
    }
    main.append(table);

    // labels-so-far bar chart for the latest iteration
    const latest = this.iterations[this.iterations.length - 1];
    if (latest) {
      const chart = this.el("div", { id: "label-chart" });
      const most = Math.max(...Object.values(latest.label_counts), 1);
      for (const [label, count] of Object.entries(latest.label_counts)) {
        const row = this.el("div", { class: "chart-row" });
        row.append(this.el("span", { class: "chart-label" }, `${label} (${count})`));
        const bar = this.el("div", { class: "chart-bar", "data-count": String(count) });
        bar.style.width = `${Math.round((count / most) * 100)}%`;
        row.append(bar);
        chart.append(row);
      }
      main.append(chart);
    }
    return main;
  }

  private renderRollup(): HTMLElement {
    const main = this.el("main", { id: "view-products" });
    if (this.rollup.length === 0) {
      main.append(this.el("p", { class: "muted" }, "no flagged products"));
      return main;
    }
    const table = this.el("table", { id: "rollup-table" });
    const head = this.el("tr", {});
    for (const title of ["product", "flagged reviews", "escalation"]) {
      head.append(this.el("th", {}, title));
    }
    table.append(head);
    for (const row of this.rollup) {
      const tr = this.el("tr", { "data-product": row.product });
      tr.append(this.el("td", {}, row.product));
      tr.append(this.el("td", {}, String(row.flagged_count)));
      tr.append(this.el("td", { class: row.escalation ? "escalated" : "" },
        row.escalation ? "ESCALATE" : "-"));
      table.append(tr);
    }
    main.append(table);
    return main;
  }
}
