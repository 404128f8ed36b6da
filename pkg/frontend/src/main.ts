// Entry point: lobby -> lab panel wiring against a running vlab service.

import { VlabApi } from "./api.js";
import { subscribeEvents, type StreamHandle } from "./stream.js";
import { LabViewModel, type CardButton } from "./viewmodel.js";
import { renderLab, renderLobby, renderReport, type LobbyChoice } from "./ui.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("api") ?? "http://127.0.0.1:7180";
const api = new VlabApi(baseUrl);
const root = document.getElementById("app") as HTMLElement;

let vm: LabViewModel | null = null;
let stream: StreamHandle | null = null;
let banner: { kind: "ok" | "reject"; text: string } | undefined;

function redraw(): void {
  if (vm) {
    renderLab(document, root, vm, { onAction: performAction, onFinish: finish }, banner);
  }
}

async function startSession(choice: LobbyChoice): Promise<void> {
  const initial = await api.createSession(choice.packId, choice.mode, choice.procedureId);
  vm = new LabViewModel(initial);
  banner = undefined;
  // the one push channel: reconnect-safe because history replays
  stream = subscribeEvents(
    api.eventsUrl(initial.session_id),
    (event) => {
      vm?.applyEvent(event);
      redraw();
    },
    { onConnect: () => vm?.resetToInitial() },
  );
  redraw();
}

async function performAction(
  entityId: string,
  button: CardButton,
  amount?: number,
): Promise<void> {
  if (!vm) return;
  const action = vm.actionFor(entityId, button, amount);
  // no optimistic updates: the card state changes only via the event
  // stream; the response only drives the hint/rejection banner
  const outcome = await api.postAction(vm.sessionId, action);
  if (outcome.suggestion !== undefined) vm.setSuggestion(outcome.suggestion);
  banner = outcome.accepted
    ? { kind: "ok", text: "accepted" }
    : { kind: "reject", text: outcome.reason ?? "rejected" };
  redraw();
}

async function finish(): Promise<void> {
  if (!vm) return;
  const report = await api.finish(vm.sessionId);
  stream?.close();
  renderReport(document, root, report);
}

async function boot(): Promise<void> {
  try {
    const packs = await api.listPacks();
    renderLobby(document, root, packs, (choice) => {
      startSession(choice).catch(showError);
    });
  } catch (error) {
    showError(error);
  }
}

function showError(error: unknown): void {
  const banner = document.createElement("div");
  banner.className = "service-error";
  banner.textContent = `service unreachable at ${baseUrl}: ${String(error)}`;
  root.replaceChildren(banner);
}

void boot();
