/**
 * Console entry point: wires the store, the pollers, and the DOM regions
 * inside #app. The gateway base URL comes from the `api` query parameter
 * and defaults to same-origin.
 */

import { ApiClient } from "./api.js";
import { createPoller } from "./poller.js";
import {
  collectUnitDeltas,
  renderBanner,
  renderCaseDetail,
  renderDecisionBar,
  renderMetricsStrip,
  renderQueueTable,
} from "./render.js";
import { ConsoleStore, describeError, type ConsoleState } from "./state.js";

const QUEUE_POLL_MS = 2_000;
const METRICS_POLL_MS = 10_000;

function mount(root: HTMLElement): void {
  const baseUrl = new URLSearchParams(location.search).get("api") ?? "";
  const client = new ApiClient(baseUrl);
  const store = new ConsoleStore(client);

  const bannerSlot = document.createElement("div");
  const metricsSlot = document.createElement("div");
  const queueSlot = document.createElement("div");
  const detailSlot = document.createElement("div");
  root.replaceChildren(bannerSlot, metricsSlot, queueSlot, detailSlot);

  const draw = (state: ConsoleState): void => {
    bannerSlot.replaceChildren();
    if (state.banner) {
      bannerSlot.appendChild(renderBanner(state.banner, () => store.dismissBanner()));
    }

    metricsSlot.replaceChildren();
    if (state.metrics) metricsSlot.appendChild(renderMetricsStrip(state.metrics));

    queueSlot.replaceChildren(
      renderQueueTable(state.queue, state.selectedCaseId, (caseId) => {
        store.select(caseId).catch((err) => console.error(describeError(err)));
      }),
    );

    detailSlot.replaceChildren();
    if (state.detail) {
      const panel = renderCaseDetail(state.detail);
      detailSlot.appendChild(panel);
      if (state.detail.status === "awaiting_review") {
        const caseId = state.detail.case_id;
        const busy = state.pendingDecision === caseId;
        detailSlot.appendChild(
          renderDecisionBar(busy, {
            onAccept: () => void store.decide(caseId, "accept"),
            onReject: () => void store.decide(caseId, "reject"),
            onModify: () =>
              void store.decide(caseId, "modify", collectUnitDeltas(panel)),
          }),
        );
      }
    }
  };

  store.subscribe(draw);
  draw(store.getState());

  const queuePoller = createPoller(
    () => store.refreshQueue(),
    QUEUE_POLL_MS,
    (err) => console.error(describeError(err)),
  );
  const metricsPoller = createPoller(
    () => store.refreshMetrics(),
    METRICS_POLL_MS,
    (err) => console.error(describeError(err)),
  );
  queuePoller.start();
  metricsPoller.start();
}

const root = document.getElementById("app");
if (root) mount(root);
