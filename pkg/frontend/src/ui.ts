// DOM rendering for the lab panel. All state lives in the view-model;
// this layer only draws it and forwards clicks.

import type { VlabApi } from "./api.js";
import type { LabViewModel, CardButton } from "./viewmodel.js";
import { reportScore } from "./viewmodel.js";
import type { EntityView, PackInfo, ReportView } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function formatValue(value: boolean | number | string): string {
  if (typeof value === "boolean") return value ? "on" : "off";
  return String(value);
}

export interface LobbyChoice {
  packId: string;
  mode: "instruction" | "evaluation" | "experimentation";
  procedureId?: string;
}

export function renderLobby(
  doc: Document,
  root: HTMLElement,
  packs: PackInfo[],
  onStart: (choice: LobbyChoice) => void,
): void {
  root.replaceChildren();
  const panel = el(doc, "div", "lobby");
  panel.appendChild(el(doc, "h1", "title", "Virtual Lab"));

  const packSelect = el(doc, "select", "pack-select");
  for (const pack of packs) {
    const option = el(doc, "option", undefined, `${pack.pack_id} ${pack.version}`);
    option.value = pack.pack_id;
    packSelect.appendChild(option);
  }

  const modeSelect = el(doc, "select", "mode-select");
  for (const mode of ["instruction", "evaluation", "experimentation"]) {
    const option = el(doc, "option", undefined, mode);
    option.value = mode;
    modeSelect.appendChild(option);
  }

  const procedureSelect = el(doc, "select", "procedure-select");

  const syncProcedures = () => {
    procedureSelect.replaceChildren();
    const pack = packs.find((p) => p.pack_id === packSelect.value);
    for (const procedure of pack?.procedures ?? []) {
      const option = el(doc, "option", undefined, procedure.title);
      option.value = procedure.id;
      procedureSelect.appendChild(option);
    }
    // experimentation binds no procedure
    procedureSelect.hidden = modeSelect.value === "experimentation";
  };
  packSelect.addEventListener("change", syncProcedures);
  modeSelect.addEventListener("change", syncProcedures);
  syncProcedures();

  const start = el(doc, "button", "start-button", "Start session");
  start.addEventListener("click", () => {
    const mode = modeSelect.value as LobbyChoice["mode"];
    onStart({
      packId: packSelect.value,
      mode,
      procedureId: mode === "experimentation" ? undefined : procedureSelect.value,
    });
  });

  for (const node of [packSelect, modeSelect, procedureSelect, start]) {
    panel.appendChild(node);
  }
  root.appendChild(panel);
}

export interface LabCallbacks {
  onAction(entityId: string, button: CardButton, amount?: number): void;
  onFinish(): void;
}

export function renderLab(
  doc: Document,
  root: HTMLElement,
  vm: LabViewModel,
  callbacks: LabCallbacks,
  banner?: { kind: "ok" | "reject"; text: string },
): void {
  root.replaceChildren();
  const panel = el(doc, "div", "lab");

  const header = el(doc, "div", "header");
  header.appendChild(el(doc, "span", "mode-banner", `mode: ${vm.mode}`));
  header.appendChild(el(doc, "span", "tick", `tick ${vm.tick}`));
  const finish = el(doc, "button", "finish-button", "Finish session");
  finish.addEventListener("click", callbacks.onFinish);
  header.appendChild(finish);
  panel.appendChild(header);

  if (vm.mode === "instruction") {
    const hint = vm.suggestion?.hint_text ?? "Procedure completed.";
    panel.appendChild(el(doc, "div", "hint-panel", hint));
  }
  if (banner) {
    panel.appendChild(el(doc, "div", `banner banner-${banner.kind}`, banner.text));
  }

  const zonesRow = el(doc, "div", "zones");
  for (const zone of vm.zones) {
    const zoneBox = el(doc, "div", "zone");
    zoneBox.appendChild(el(doc, "h2", "zone-label", zone.label));
    for (const entity of vm.entitiesInZone(zone.id)) {
      zoneBox.appendChild(renderCard(doc, vm, entity, callbacks));
    }
    zonesRow.appendChild(zoneBox);
  }
  panel.appendChild(zonesRow);

  if (vm.steps.length > 0) {
    const checklist = el(doc, "ol", "checklist");
    for (const item of vm.checklist()) {
      const li = el(doc, "li", item.done ? "step done" : "step", item.hint);
      li.dataset.stepId = item.id;
      checklist.appendChild(li);
    }
    panel.appendChild(checklist);
  }

  const feed = el(doc, "ul", "event-feed");
  for (const item of vm.feed().slice(-30)) {
    feed.appendChild(
      el(doc, "li", `feed-item feed-${item.kind}`, `[${item.tick}] ${item.text}`),
    );
  }
  panel.appendChild(feed);

  root.appendChild(panel);
}

function renderCard(
  doc: Document,
  vm: LabViewModel,
  entity: EntityView,
  callbacks: LabCallbacks,
): HTMLElement {
  const card = el(doc, "div", "card");
  card.dataset.entityId = entity.id;
  card.appendChild(el(doc, "h3", "card-title", entity.id));
  card.appendChild(el(doc, "div", "card-kind", entity.kind));

  const readouts = el(doc, "dl", "readouts");
  for (const key of Object.keys(entity.state).sort()) {
    readouts.appendChild(el(doc, "dt", undefined, key));
    readouts.appendChild(
      el(doc, "dd", undefined, formatValue(entity.state[key] as boolean | number | string)),
    );
  }
  card.appendChild(readouts);

  const amountInput = el(doc, "input", "amount-input");
  amountInput.type = "number";
  amountInput.placeholder = "amount";
  amountInput.step = "any";

  const buttonRow = el(doc, "div", "card-buttons");
  let hasUseWith = false;
  for (const button of vm.buttonsFor(entity.id)) {
    const node = el(doc, "button", `verb-${button.verb}`, button.label);
    node.addEventListener("click", () => {
      const amount =
        button.needsAmount && amountInput.value !== ""
          ? Number(amountInput.value)
          : undefined;
      callbacks.onAction(entity.id, button, amount);
    });
    buttonRow.appendChild(node);
    if (button.needsAmount) hasUseWith = true;
  }
  if (hasUseWith) card.appendChild(amountInput);
  card.appendChild(buttonRow);
  return card;
}

export function renderReport(doc: Document, root: HTMLElement, report: ReportView): void {
  const overlay = el(doc, "div", "report-view");
  overlay.appendChild(el(doc, "h2", undefined, "Session report"));
  overlay.appendChild(el(doc, "div", "report-mode", `mode: ${report.mode}`));
  overlay.appendChild(
    el(doc, "div", "report-steps",
       `steps: ${report.steps_matched}/${report.steps_total}`),
  );
  overlay.appendChild(
    el(doc, "div", "report-actions", `actions: ${report.action_count}`),
  );
  overlay.appendChild(
    el(doc, "div", "report-score", `score: ${reportScore(report)}`),
  );
  root.appendChild(overlay);
}
