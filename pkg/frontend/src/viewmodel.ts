// Session view-model: a pure function of (initial state + event history).
//
// The client never simulates: entity state only changes by applying
// server-computed state deltas from the event stream, and the checklist
// only advances on step_matched events. Reconnects reset to the initial
// snapshot and let the server's full-history replay rebuild the view,
// which makes the view trivially reconnect-safe.

import type {
  ActionBody,
  CardInfo,
  EntityView,
  SessionEvent,
  StateView,
  StepInfo,
  SuggestionView,
  Verb,
  ZoneView,
  ReportView,
} from "./types.js";

export interface ChecklistItem {
  id: string;
  hint: string;
  done: boolean;
}

export interface FeedItem {
  tick: number;
  kind: "action" | "info" | "hazard" | "completed" | "finished";
  text: string;
}

export interface CardButton {
  verb: Verb;
  label: string;
  partner?: string;
  direction?: "cw" | "ccw";
  targetZone?: string;
  needsAmount?: boolean;
}

function cloneEntities(entities: EntityView[]): Map<string, EntityView> {
  const map = new Map<string, EntityView>();
  for (const entity of entities) {
    map.set(entity.id, { ...entity, state: { ...entity.state } });
  }
  return map;
}

function describeAction(action: ActionBody): string {
  const params = action.params ?? {};
  const parts: string[] = [action.verb, action.subject];
  if (action.partner) parts.push(`with ${action.partner}`);
  if (params.direction) parts.push(params.direction);
  if (params.amount !== undefined) parts.push(`amount ${params.amount}`);
  if (params.target_zone) parts.push(`to ${params.target_zone}`);
  return parts.join(" ");
}

export class LabViewModel {
  readonly sessionId: string;
  readonly mode: StateView["mode"];
  readonly zones: ZoneView[];
  readonly steps: StepInfo[];
  readonly cards: CardInfo[];

  private readonly initialEntities: EntityView[];
  private entities_: Map<string, EntityView>;
  private matched: string[] = [];
  private feedItems: FeedItem[] = [];
  private tick_ = 0;
  private focus_: string | null = null;
  private completed_ = false;
  private finished_ = false;
  private suggestion_: SuggestionView | null;

  constructor(initial: StateView) {
    if (initial.tick !== 0) {
      throw new Error("view-model must be seeded with the tick-0 state view");
    }
    this.sessionId = initial.session_id;
    this.mode = initial.mode;
    this.zones = initial.zones;
    this.steps = initial.procedure?.steps ?? [];
    this.cards = initial.cards;
    this.initialEntities = initial.entities;
    this.entities_ = cloneEntities(this.initialEntities);
    this.suggestion_ = initial.suggestion ?? null;
    this.focus_ = initial.focus;
  }

  /** Drop everything derived from events (reconnect path: the stream
   * replays history from tick 0 right after). */
  resetToInitial(): void {
    this.entities_ = cloneEntities(this.initialEntities);
    this.matched = [];
    this.feedItems = [];
    this.tick_ = 0;
    this.focus_ = null;
    this.completed_ = false;
    this.finished_ = false;
  }

  applyEvent(event: SessionEvent): void {
    if (event.type === "action") {
      const { action, state_delta } = event.payload;
      for (const delta of state_delta) {
        const entity = this.entities_.get(delta.entity);
        if (!entity) continue;
        if (delta.feature === "@zone") {
          entity.zone = String(delta.new);
        } else {
          entity.state[delta.feature] = delta.new as boolean | number | string;
        }
      }
      if (action.verb === "zoom") this.focus_ = action.subject;
      this.tick_ = event.tick;
      this.feedItems.push({
        tick: event.tick,
        kind: "action",
        text: describeAction(action),
      });
    } else if (event.type === "rule_event") {
      this.feedItems.push({
        tick: event.tick,
        kind: event.payload.severity,
        text: event.payload.message,
      });
    } else if (event.type === "step_matched") {
      if (!this.matched.includes(event.payload.step_id)) {
        this.matched.push(event.payload.step_id);
      }
    } else if (event.type === "completed") {
      this.completed_ = true;
      this.feedItems.push({ tick: event.tick, kind: "completed", text: "Procedure completed" });
    } else if (event.type === "finished") {
      this.finished_ = true;
      this.feedItems.push({ tick: event.tick, kind: "finished", text: "Session finished" });
    }
  }

  setSuggestion(suggestion: SuggestionView | null | undefined): void {
    this.suggestion_ = suggestion ?? null;
  }

  get tick(): number {
    return this.tick_;
  }

  get focus(): string | null {
    return this.focus_;
  }

  get completed(): boolean {
    return this.completed_;
  }

  get finished(): boolean {
    return this.finished_;
  }

  get suggestion(): SuggestionView | null {
    return this.suggestion_;
  }

  entities(): EntityView[] {
    return [...this.entities_.values()].sort((a, b) => a.id.localeCompare(b.id));
  }

  entitiesInZone(zoneId: string): EntityView[] {
    return this.entities().filter((entity) => entity.zone === zoneId);
  }

  matchedSteps(): string[] {
    return [...this.matched];
  }

  checklist(): ChecklistItem[] {
    const done = new Set(this.matched);
    return this.steps.map((step) => ({
      id: step.id,
      hint: step.hint,
      done: done.has(step.id),
    }));
  }

  feed(): FeedItem[] {
    return [...this.feedItems];
  }

  buttonsFor(entityId: string): CardButton[] {
    const card = this.cards.find((c) => c.id === entityId);
    const entity = this.entities_.get(entityId);
    if (!card || !entity) return [];
    const buttons: CardButton[] = [];
    for (const verb of card.affordances) {
      if (verb === "press" || verb === "pull" || verb === "zoom") {
        buttons.push({ verb, label: verb });
      } else if (verb === "rotate") {
        buttons.push({ verb, label: "rotate ccw", direction: "ccw" });
        buttons.push({ verb, label: "rotate cw", direction: "cw" });
      } else if (verb === "move") {
        for (const zone of this.zones) {
          if (zone.id !== entity.zone) {
            buttons.push({ verb, label: `move to ${zone.label}`, targetZone: zone.id });
          }
        }
      } else if (verb === "use_with") {
        for (const partner of card.use_with_partners) {
          buttons.push({
            verb,
            label: `use with ${partner}`,
            partner,
            needsAmount: true,
          });
        }
      }
    }
    return buttons;
  }

  actionFor(entityId: string, button: CardButton, amount?: number): ActionBody {
    const action: ActionBody = { verb: button.verb, subject: entityId };
    const params: NonNullable<ActionBody["params"]> = {};
    if (button.partner) action.partner = button.partner;
    if (button.direction) params.direction = button.direction;
    if (button.targetZone) params.target_zone = button.targetZone;
    if (amount !== undefined && Number.isFinite(amount)) params.amount = amount;
    if (Object.keys(params).length > 0) action.params = params;
    return action;
  }

  /** View purity check: does this event-derived view agree with an
   * authoritative server state view? */
  agreesWith(view: StateView): boolean {
    if (view.tick !== this.tick_) return false;
    const mine = this.entities();
    const theirs = [...view.entities].sort((a, b) => a.id.localeCompare(b.id));
    if (JSON.stringify(mine.map(strip)) !== JSON.stringify(theirs.map(strip))) {
      return false;
    }
    const matchedMine = [...this.matched].sort();
    const matchedTheirs = [...view.matched_steps].sort();
    return JSON.stringify(matchedMine) === JSON.stringify(matchedTheirs);

    function strip(entity: EntityView) {
      const state: Record<string, boolean | number | string> = {};
      for (const key of Object.keys(entity.state).sort()) {
        state[key] = entity.state[key] as boolean | number | string;
      }
      return { id: entity.id, kind: entity.kind, zone: entity.zone, state };
    }
  }
}

/** The number the report view displays: the assessment score when one
 * exists, completion percentage otherwise. */
export function reportScore(report: ReportView): number {
  if (report.evaluation) return report.evaluation.score;
  if (report.steps_total === 0) return 100;
  return Math.round((100 * report.steps_matched) / report.steps_total);
}
