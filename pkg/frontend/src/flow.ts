/** Session state machine.
 *
 * State is derived from API responses only. A judgment that fails to POST
 * is kept as a pending retry (never dropped silently): progress rolls back
 * to the acknowledged count and judging is blocked until the retry lands.
 */

import type { ReviewApi } from './api.js';
import type { PendingJudgment, ReviewItem, Verdict } from './types.js';

export type Phase = 'loading' | 'reviewing' | 'done' | 'error';

export interface FlowState {
  phase: Phase;
  item: ReviewItem | null;
  judged: number;
  total: number;
  pendingRetry: PendingJudgment | null;
  error: string | null;
}

export type FlowListener = (state: FlowState) => void;

export class ReviewFlow {
  private state: FlowState = {
    phase: 'loading',
    item: null,
    judged: 0,
    total: 0,
    pendingRetry: null,
    error: null,
  };

  private listeners: FlowListener[] = [];

  constructor(private readonly api: ReviewApi) {}

  get current(): FlowState {
    return this.state;
  }

  subscribe(listener: FlowListener): void {
    this.listeners.push(listener);
    listener(this.state);
  }

  private update(patch: Partial<FlowState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  async start(): Promise<void> {
    try {
      const session = await this.api.getSession();
      this.update({ judged: session.judged, total: session.total });
      await this.advance();
    } catch (err) {
      this.update({ phase: 'error', error: String(err) });
    }
  }

  private async advance(): Promise<void> {
    const next = await this.api.getNext();
    if (next.done) {
      this.update({ phase: 'done', item: null, judged: next.judged, total: next.total });
    } else {
      this.update({ phase: 'reviewing', item: next, judged: next.judged, total: next.total });
    }
  }

  /** Post a verdict for the current item and advance on acknowledgment. */
  async judge(verdict: Verdict): Promise<boolean> {
    const item = this.state.item;
    if (this.state.phase !== 'reviewing' || item === null || this.state.pendingRetry) {
      return false;
    }
    const judgment: PendingJudgment = { recording_id: item.recording_id, verdict };
    const acknowledged = this.state.judged;
    this.update({ judged: acknowledged + 1 }); // optimistic
    try {
      const ack = await this.api.postJudgment(judgment);
      this.update({ judged: ack.judged, total: ack.total });
      await this.advance();
      return true;
    } catch (err) {
      // roll back and queue for retry; nothing is lost
      this.update({ judged: acknowledged, pendingRetry: judgment, error: String(err) });
      return false;
    }
  }

  /** Re-post the queued judgment, if any. */
  async retry(): Promise<boolean> {
    const pending = this.state.pendingRetry;
    if (!pending) {
      return true;
    }
    try {
      const ack = await this.api.postJudgment(pending);
      this.update({ pendingRetry: null, error: null, judged: ack.judged, total: ack.total });
      await this.advance();
      return true;
    } catch (err) {
      this.update({ error: String(err) });
      return false;
    }
  }
}
