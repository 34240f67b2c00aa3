// DOM layer. The skeleton is built once and render() only touches
// text/attributes, so the score input keeps focus while typing.
//
// Displayed numbers carry a data-exact attribute with the untouched
// service value; the visible text is a rounded form of the same number.

import { Client, EstimateInfo } from "./api.js";
import { Console, ConsoleState, QUICK_PICKS, StartParams } from "./state.js";

export function sparklinePoints(
  values: number[],
  width: number,
  height: number,
  pad = 2,
): Array<[number, number]> {
  if (values.length === 0) return [];
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo;
  return values.map((v, i) => {
    const x =
      values.length === 1
        ? width / 2
        : pad + (i / (values.length - 1)) * (width - 2 * pad);
    const y =
      span === 0 ? height / 2 : height - pad - ((v - lo) / span) * (height - 2 * pad);
    return [x, y];
  });
}

export function polylineAttr(points: Array<[number, number]>): string {
  return points.map(([x, y]) => `${x},${y}`).join(" ");
}

export function fmt(value: number): string {
  return value.toFixed(4);
}

const SKELETON = `
  <h1>rating console</h1>
  <div id="session-line" hidden>session <code id="session-id"></code></div>
  <div id="error-banner" class="banner" hidden></div>

  <form id="setup-form">
    <label>test set <input id="f-test-set" list="test-set-options" required>
      <datalist id="test-set-options"></datalist></label>
    <label>budget <input id="f-budget" type="number" min="1" step="1" required></label>
    <label>strategy <select id="f-strategy">
      <option value="incr-human" selected>adaptive (human scores)</option>
      <option value="incr-metrics">adaptive (metric proxy)</option>
      <option value="proportional">proportional</option>
    </select></label>
    <label>partition <select id="f-partition">
      <option value="docs" selected>documents</option>
      <option value="metrics">metric bins</option>
    </select></label>
    <label>scale <select id="f-scale">
      <option value="25" selected>0&ndash;25</option>
      <option value="100">0&ndash;100</option>
    </select></label>
    <label>gamma <input id="f-gamma" type="number" value="0.95" min="0.5" max="0.999" step="0.001"></label>
    <label>score range <input id="f-r-override" placeholder="auto"></label>
    <label>seed <input id="f-seed" placeholder="auto"></label>
    <button id="start-btn" type="submit">start session</button>
  </form>

  <section id="rating-panel" hidden>
    <div id="progress-line">rated <span id="n-rated"></span> of <span id="budget-total"></span></div>
    <progress id="progress-bar" value="0"></progress>
    <div id="segment-card">
      <div>segment <b id="segment-id"></b> &middot; document <b id="doc-id"></b></div>
      <table id="metrics-table"></table>
    </div>
    <div id="score-entry">
      <input id="score-input" inputmode="decimal" autocomplete="off" placeholder="score">
      <span id="quick-picks"></span>
      <button id="submit-btn" type="button">submit rating</button>
    </div>
    <div id="estimate-panel" hidden>
      <div>estimate <span id="estimate-value" class="num"></span> <span id="bound-text"></span></div>
      <svg id="sparkline" width="220" height="48" viewBox="0 0 220 48">
        <polyline id="sparkline-line" fill="none" stroke="#2b6cb0" stroke-width="1.5"></polyline>
      </svg>
      <ul id="history"></ul>
    </div>
  </section>

  <section id="complete-panel" hidden>
    <h2>session complete</h2>
    <div>final estimate <span id="final-value" class="num"></span> <span id="final-bound-text"></span></div>
    <div id="final-meta"></div>
    <button id="new-session-btn" type="button">new session</button>
  </section>
`;

function boundText(estimate: EstimateInfo): string {
  const bound = estimate.bound;
  if (!bound) return "(no bound yet)";
  return `± ${fmt(bound.t)} at ${(bound.gamma * 100).toFixed(0)}%`;
}

export function mountConsole(root: HTMLElement, client: Client): Console {
  root.innerHTML = SKELETON;
  const el = <T extends HTMLElement = HTMLElement>(id: string): T => {
    const found = root.querySelector<T>("#" + id);
    if (!found) throw new Error(`missing element #${id}`);
    return found;
  };

  const banner = el("error-banner");
  const setupForm = el<HTMLFormElement>("setup-form");
  const ratingPanel = el("rating-panel");
  const completePanel = el("complete-panel");
  const scoreInput = el<HTMLInputElement>("score-input");
  const estimatePanel = el("estimate-panel");
  const historyList = el("history");
  const sparkLine = root.querySelector<SVGPolylineElement>("#sparkline-line");

  const quickPicks = el("quick-picks");
  for (const value of QUICK_PICKS) {
    const btn = document.createElement("button");
    btn.type = "button";
    btn.className = "quick-pick";
    btn.textContent = String(value);
    btn.addEventListener("click", () => {
      scoreInput.value = String(value);
      con.setDraft(scoreInput.value);
      scoreInput.focus();
    });
    quickPicks.appendChild(btn);
  }

  function render(state: ConsoleState): void {
    banner.hidden = state.error === null;
    banner.textContent = state.error ?? "";

    el("session-line").hidden = state.session === null;
    el("session-id").textContent = state.session?.session_id ?? "";

    setupForm.hidden = state.mode !== "setup";
    ratingPanel.hidden = state.mode !== "rating";
    completePanel.hidden = state.mode !== "complete";

    el<HTMLButtonElement>("start-btn").disabled = state.busy;
    el<HTMLButtonElement>("submit-btn").disabled = state.busy;

    el("n-rated").textContent = String(state.nRated);
    el("budget-total").textContent = String(state.budget);
    const bar = el<HTMLProgressElement>("progress-bar");
    bar.max = Math.max(state.budget, 1);
    bar.value = state.nRated;

    if (state.pending) {
      el("segment-id").textContent = state.pending.segmentId;
      el("doc-id").textContent = state.pending.docId;
      const rows = Object.entries(state.pending.metrics)
        .map(
          ([name, value]) =>
            `<tr><td>${name}</td><td class="num" data-exact="${String(value)}">${String(value)}</td></tr>`,
        )
        .join("");
      el("metrics-table").innerHTML = rows;
    }
    if (scoreInput.value !== state.draft) scoreInput.value = state.draft;

    // the running-estimate block only exists once something was rated
    estimatePanel.hidden = state.history.length === 0;
    const last = state.history[state.history.length - 1];
    if (last) {
      const value = el("estimate-value");
      value.textContent = fmt(last.estimate.value);
      value.dataset.exact = String(last.estimate.value);
      const boundEl = el("bound-text");
      boundEl.textContent = boundText(last.estimate);
      boundEl.dataset.exact = last.estimate.bound
        ? String(last.estimate.bound.t)
        : "";
      if (sparkLine) {
        const values = state.history.map((h) => h.estimate.value);
        sparkLine.setAttribute("points", polylineAttr(sparklinePoints(values, 220, 48)));
      }
      historyList.innerHTML = state.history
        .map((entry, i) => {
          const t = entry.estimate.bound ? String(entry.estimate.bound.t) : "";
          return (
            `<li data-exact="${String(entry.estimate.value)}" data-bound="${t}">` +
            `#${i + 1} ${entry.segmentId}: score ${String(entry.score)} ` +
            `&rarr; estimate ${fmt(entry.estimate.value)}</li>`
          );
        })
        .join("");
    }

    if (state.final) {
      const value = el("final-value");
      value.textContent = fmt(state.final.value);
      value.dataset.exact = String(state.final.value);
      const boundEl = el("final-bound-text");
      boundEl.textContent = boundText(state.final);
      boundEl.dataset.exact = state.final.bound ? String(state.final.bound.t) : "";
      const flags = state.final.flags.length
        ? ` flags: ${state.final.flags.join(", ")}`
        : "";
      el("final-meta").textContent =
        `${state.final.n} ratings, method ${state.final.method}, ` +
        `cv ${state.final.cv}.${flags}`;
    }
  }

  const con = new Console(client, render);

  setupForm.addEventListener("submit", (event) => {
    event.preventDefault();
    const field = (id: string) => el<HTMLInputElement>(id).value.trim();
    const params: StartParams = {
      test_set: field("f-test-set"),
      budget: Number(field("f-budget")),
      strategy: el<HTMLSelectElement>("f-strategy").value,
      partition: el<HTMLSelectElement>("f-partition").value,
      gamma: Number(field("f-gamma")),
      maxScore: Number(el<HTMLSelectElement>("f-scale").value),
    };
    if (field("f-r-override") !== "") params.r_override = Number(field("f-r-override"));
    if (field("f-seed") !== "") params.seed = Number(field("f-seed"));
    void con.start(params);
  });

  scoreInput.addEventListener("input", () => con.setDraft(scoreInput.value));
  scoreInput.addEventListener("keydown", (event) => {
    if (event.key === "Enter") {
      event.preventDefault();
      con.setDraft(scoreInput.value);
      void con.submit();
    }
  });
  el("submit-btn").addEventListener("click", () => {
    con.setDraft(scoreInput.value);
    void con.submit();
  });
  el("new-session-btn").addEventListener("click", () => con.reset());

  // best effort: suggest the test sets the server knows about
  client
    .health()
    .then((health) => {
      el("test-set-options").innerHTML = health.test_sets
        .map((name) => `<option value="${name}"></option>`)
        .join("");
    })
    .catch(() => {});

  render(con.state);
  return con;
}
