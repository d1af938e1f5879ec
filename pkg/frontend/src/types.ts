/** Payload shapes of the review service API. The UI holds no state of its
 * own beyond these responses. */

export type Verdict = 'correct' | 'incorrect';

export type PolicyKey = 'all' | 'consensus' | 'consensus+1i' | 'consensus+1c';

export const POLICY_ORDER: PolicyKey[] = ['all', 'consensus', 'consensus+1i', 'consensus+1c'];

export const POLICY_LABELS: Record<PolicyKey, string> = {
  all: 'All data',
  consensus: 'Consensus',
  'consensus+1i': 'Consensus & one incorrect',
  'consensus+1c': 'Consensus & one correct',
};

export interface SessionInfo {
  session_id: string;
  seed: number;
  judged: number;
  total: number;
}

export interface ReviewItem {
  done: false;
  recording_id: string;
  question_text: string;
  audio_url: string;
  judged: number;
  total: number;
}

export interface SessionDone {
  done: true;
  judged: number;
  total: number;
}

export type NextResponse = ReviewItem | SessionDone;

export interface JudgmentAck {
  ok: boolean;
  judged: number;
  total: number;
}

export interface AgreementCell {
  rate: number;
  agreements: number;
  judged_retained: number;
}

export type PolicyCells = Record<PolicyKey, AgreementCell | null>;

export interface AgreementTables {
  overall: PolicyCells;
  per_question: Record<string, PolicyCells>;
  judged: number;
  total: number;
}

export interface PendingJudgment {
  recording_id: string;
  verdict: Verdict;
}
