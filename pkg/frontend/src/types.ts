// Wire types for the vlab session service (HTTP+JSON).

export type Mode = "instruction" | "evaluation" | "experimentation";

export type Verb = "press" | "rotate" | "pull" | "zoom" | "move" | "use_with";

export interface ProcedureInfo {
  id: string;
  title: string;
}

export interface PackInfo {
  pack_id: string;
  version: string;
  procedures: ProcedureInfo[];
}

export interface ZoneView {
  id: string;
  label: string;
}

export interface EntityView {
  id: string;
  kind: string;
  zone: string;
  state: Record<string, boolean | number | string>;
}

export interface CardInfo {
  id: string;
  affordances: Verb[];
  use_with_partners: string[];
}

export interface StepInfo {
  id: string;
  hint: string;
}

export interface ActionParams {
  direction?: "cw" | "ccw";
  amount?: number;
  target_zone?: string;
}

export interface ActionBody {
  verb: Verb;
  subject: string;
  partner?: string;
  params?: ActionParams;
}

export interface SuggestionView {
  step_id: string;
  hint_text: string;
  action: ActionBody;
}

export interface StateView {
  session_id: string;
  mode: Mode;
  tick: number;
  focus: string | null;
  zones: ZoneView[];
  entities: EntityView[];
  cards: CardInfo[];
  matched_steps: string[];
  completed: boolean;
  finished: boolean;
  procedure?: { id: string; title: string; steps: StepInfo[] };
  suggestion?: SuggestionView | null;
}

export interface DeltaEntry {
  entity: string;
  feature: string; // "@zone" marks a zone change
  old: boolean | number | string | null;
  new: boolean | number | string;
}

export interface RuleEventView {
  severity: "info" | "hazard";
  message: string;
  rule: string;
}

export interface ActionOutcome {
  accepted: boolean;
  reason?: string;
  newly_matched: string[];
  completed: boolean;
  events: RuleEventView[];
  state_delta: DeltaEntry[];
  suggestion?: SuggestionView | null;
  tick?: number;
}

export type SessionEvent =
  | { tick: number; type: "action"; payload: { action: ActionBody; state_delta: DeltaEntry[] } }
  | { tick: number; type: "rule_event"; payload: RuleEventView }
  | { tick: number; type: "step_matched"; payload: { step_id: string } }
  | { tick: number; type: "completed"; payload: Record<string, never> }
  | { tick: number; type: "finished"; payload: Record<string, never> };

export interface EvaluationView {
  score: number;
  score_raw: number;
  steps_matched: number;
  steps_total: number;
  penalty_total: number;
  classifications: {
    tick: number;
    class: string;
    penalty: number;
    matched_step?: string;
  }[];
}

export interface ReportView {
  mode: Mode;
  steps_matched: number;
  steps_total: number;
  action_count: number;
  evaluation?: EvaluationView;
}

export interface ApiErrorBody {
  code: string;
  message: string;
}
