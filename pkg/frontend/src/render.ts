/**
 * DOM builders for the review console.
 *
 * Pure functions from API payloads to detached elements; callers mount
 * them and pass handlers in. No framework, no global state, so every
 * builder is testable against a bare document.
 */

import type {
  AtomicUnit,
  CaseDetail,
  GateTrace,
  MetricsSnapshot,
  ReviewTask,
  ScoreBreakdown,
  UnitDelta,
  VerificationFinding,
} from "./api.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** "1234.5s" below two minutes, whole minutes above. */
export function formatSeconds(seconds: number | null): string {
  if (seconds === null) return "n/a";
  if (seconds < 120) return `${seconds.toFixed(1)}s`;
  return `${Math.round(seconds / 60)}m`;
}

export function renderQueueTable(
  tasks: ReviewTask[],
  selectedCaseId: string | null,
  onSelect: (caseId: string) => void,
): HTMLTableElement {
  const table = el("table", "queue");
  const head = table.createTHead().insertRow();
  for (const label of ["Case", "Project", "Action", "Priority", "Patch"]) {
    head.appendChild(el("th", undefined, label));
  }
  const body = table.createTBody();
  for (const task of tasks) {
    const row = body.insertRow();
    row.dataset.caseId = task.case_id;
    if (task.case_id === selectedCaseId) row.classList.add("selected");
    row.insertCell().textContent = task.case_id;
    row.insertCell().textContent = task.project;
    const action = row.insertCell();
    action.textContent = task.gate_trace.action_type;
    action.appendChild(el("span", "gate-flavor", ` ${task.gate_trace.gate3_result}`));
    row.insertCell().textContent = task.priority.toFixed(3);
    row.insertCell().textContent = task.draft_patch
      ? task.draft_patch.verified
        ? "verified"
        : "unverified"
      : "none";
    row.addEventListener("click", () => onSelect(task.case_id));
  }
  return table;
}

export function renderScoreBreakdown(breakdown: ScoreBreakdown): HTMLElement {
  const box = el("div", "scores");
  const line = (
    label: string,
    components: number[],
    weights: number[],
    total: number,
  ) => {
    const row = el("div", "score-row");
    row.appendChild(el("span", "score-label", label));
    components.forEach((value, i) => {
      const cell = el("span", "score-component", value.toFixed(3));
      cell.title = `weight ${weights[i]?.toFixed(3) ?? "?"}`;
      row.appendChild(cell);
    });
    row.appendChild(el("span", "score-total", total.toFixed(3)));
    return row;
  };
  box.appendChild(
    line("risk", breakdown.risk_components, breakdown.risk_weights, breakdown.risk),
  );
  box.appendChild(
    line(
      "confidence",
      breakdown.confidence_components,
      breakdown.confidence_weights,
      breakdown.confidence,
    ),
  );
  return box;
}

export function renderGateTrace(trace: GateTrace): HTMLElement {
  const box = el("div", "gate-trace");
  box.appendChild(
    el(
      "span",
      "gate-path",
      `${trace.gate1_result} / ${trace.gate2_result ?? "skipped"} / ${trace.gate3_result}`,
    ),
  );
  const thresholds = el("span", "gate-thresholds");
  thresholds.textContent = Object.entries(trace.thresholds_used)
    .map(([name, value]) => `${name}=${value}`)
    .join(" ");
  box.appendChild(thresholds);
  return box;
}

/**
 * Unit list with one keep-checkbox per unit when checkable. Unchecking a
 * unit marks it dropped; dependents are dropped server-side.
 */
export function renderUnitList(units: AtomicUnit[], checkable: boolean): HTMLElement {
  const list = el("ul", "units");
  for (const unit of units) {
    const item = el("li", "unit");
    if (checkable) {
      const box = el("input");
      box.type = "checkbox";
      box.checked = true;
      box.className = "unit-keep";
      box.dataset.unitId = unit.unit_id;
      item.appendChild(box);
    }
    item.appendChild(el("span", "unit-kind", unit.kind));
    item.appendChild(el("span", "unit-target", ` ${unit.target}`));
    if (unit.depends_on_units.length > 0) {
      item.appendChild(
        el("span", "unit-deps", ` needs ${unit.depends_on_units.join(", ")}`),
      );
    }
    list.appendChild(item);
  }
  return list;
}

/** Unchecked keep-boxes in `container` become drop deltas for modify. */
export function collectUnitDeltas(container: ParentNode): UnitDelta[] {
  const deltas: UnitDelta[] = [];
  for (const box of container.querySelectorAll<HTMLInputElement>("input.unit-keep")) {
    if (!box.checked && box.dataset.unitId) {
      deltas.push({ unit_id: box.dataset.unitId, drop: true });
    }
  }
  return deltas;
}

export function renderFindings(findings: VerificationFinding[]): HTMLElement {
  const list = el("ul", "findings");
  for (const finding of findings) {
    const detail = typeof finding.detail === "string" ? `: ${finding.detail}` : "";
    list.appendChild(el("li", "finding", `${finding.kind}${detail}`));
  }
  return list;
}

export function renderCaseDetail(detail: CaseDetail): HTMLElement {
  const panel = el("article", "case-detail");
  const header = el("header");
  header.appendChild(el("h2", undefined, `${detail.project} ${detail.case_id}`));
  header.appendChild(
    el(
      "p",
      "case-status",
      `${detail.plan.action_type} ${detail.status}` +
        (detail.disposition ? ` ${detail.disposition}` : ""),
    ),
  );
  header.appendChild(
    el("p", "case-event", `${detail.event_type} ${detail.event_id}`),
  );
  panel.appendChild(header);

  panel.appendChild(renderScoreBreakdown(detail.breakdown));
  panel.appendChild(renderGateTrace(detail.gate_trace));

  const units = detail.patch ? detail.patch.units : detail.plan.units_planned;
  const checkable = detail.status === "awaiting_review" && detail.patch !== null;
  panel.appendChild(renderUnitList(units, checkable));

  if (detail.patch && detail.patch.verification_findings.length > 0) {
    panel.appendChild(renderFindings(detail.patch.verification_findings));
  }
  if (detail.validation_outcome) {
    panel.appendChild(
      el("pre", "validation", JSON.stringify(detail.validation_outcome, null, 2)),
    );
  }
  if (detail.rollback) {
    panel.appendChild(el("pre", "rollback", JSON.stringify(detail.rollback, null, 2)));
  }
  return panel;
}

export interface DecisionHandlers {
  onAccept(): void;
  onReject(): void;
  onModify(): void;
}

export function renderDecisionBar(busy: boolean, handlers: DecisionHandlers): HTMLElement {
  const bar = el("div", "decision-bar");
  const button = (label: string, cls: string, onClick: () => void) => {
    const b = el("button", cls, label);
    b.disabled = busy;
    b.addEventListener("click", onClick);
    return b;
  };
  bar.appendChild(button("Accept", "accept", handlers.onAccept));
  bar.appendChild(button("Reject", "reject", handlers.onReject));
  bar.appendChild(button("Apply kept units", "modify", handlers.onModify));
  return bar;
}

export function renderBanner(message: string, onDismiss: () => void): HTMLElement {
  const banner = el("div", "banner");
  banner.appendChild(el("span", "banner-text", message));
  const dismiss = el("button", "dismiss", "dismiss");
  dismiss.addEventListener("click", onDismiss);
  banner.appendChild(dismiss);
  return banner;
}

export function renderMetricsStrip(metrics: MetricsSnapshot): HTMLElement {
  const strip = el("div", "metrics");
  const stat = (label: string, value: string) => {
    const cell = el("span", "stat");
    cell.appendChild(el("b", undefined, value));
    cell.appendChild(el("small", undefined, ` ${label}`));
    return cell;
  };
  strip.appendChild(stat("cases", String(metrics.cases_total)));
  strip.appendChild(stat("pending", String(metrics.pending_reviews)));
  strip.appendChild(stat("automated", `${(metrics.automation_rate * 100).toFixed(0)}%`));
  strip.appendChild(stat("MTR", formatSeconds(metrics.mtr_seconds)));
  return strip;
}
