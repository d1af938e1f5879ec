/** DOM wiring: playback, verdict entry, progress, retry banner, agreement. */

import { ReviewApi } from './api.js';
import { ReviewFlow } from './flow.js';
import { renderAgreement } from './panel.js';
import type { FlowState } from './flow.js';
import type { Verdict } from './types.js';

export interface AppElements {
  question: HTMLElement;
  audio: HTMLAudioElement;
  correctButton: HTMLButtonElement;
  incorrectButton: HTMLButtonElement;
  replayButton: HTMLButtonElement;
  progressBar: HTMLElement;
  progressText: HTMLElement;
  retryBanner: HTMLElement;
  retryButton: HTMLButtonElement;
  doneBanner: HTMLElement;
  agreement: HTMLElement;
}

export function collectElements(doc: Document): AppElements {
  const byId = <T extends HTMLElement>(id: string): T => {
    const el = doc.getElementById(id);
    if (!el) {
      throw new Error(`missing element #${id}`);
    }
    return el as T;
  };
  return {
    question: byId('question-text'),
    audio: byId<HTMLAudioElement>('audio'),
    correctButton: byId<HTMLButtonElement>('btn-correct'),
    incorrectButton: byId<HTMLButtonElement>('btn-incorrect'),
    replayButton: byId<HTMLButtonElement>('btn-replay'),
    progressBar: byId('progress-bar'),
    progressText: byId('progress-text'),
    retryBanner: byId('retry-banner'),
    retryButton: byId<HTMLButtonElement>('btn-retry'),
    doneBanner: byId('done-banner'),
    agreement: byId('agreement'),
  };
}

export class App {
  readonly flow: ReviewFlow;

  constructor(
    private readonly elements: AppElements,
    private readonly api: ReviewApi,
  ) {
    this.flow = new ReviewFlow(api);
  }

  async start(): Promise<void> {
    this.flow.subscribe((state) => this.render(state));
    await this.flow.start();
    await this.refreshAgreement();
  }

  private render(state: FlowState): void {
    const els = this.elements;
    els.retryBanner.hidden = state.pendingRetry === null;
    els.doneBanner.hidden = state.phase !== 'done';
    const judging = state.phase === 'reviewing' && state.pendingRetry === null;
    els.correctButton.disabled = !judging;
    els.incorrectButton.disabled = !judging;
    els.replayButton.disabled = state.item === null;

    if (state.item) {
      els.question.textContent = state.item.question_text;
      if (!els.audio.src.endsWith(state.item.audio_url)) {
        els.audio.src = state.item.audio_url;
        void Promise.resolve(els.audio.play?.()).catch(() => undefined);
      }
    } else {
      els.question.textContent = state.phase === 'done' ? '' : els.question.textContent;
    }
    const fraction = state.total > 0 ? state.judged / state.total : 0;
    els.progressBar.style.width = `${Math.round(100 * fraction)}%`;
    els.progressText.textContent = `${state.judged}/${state.total}`;
  }

  async judge(verdict: Verdict): Promise<void> {
    const delivered = await this.flow.judge(verdict);
    if (delivered) {
      await this.refreshAgreement();
    }
  }

  async retry(): Promise<void> {
    const delivered = await this.flow.retry();
    if (delivered) {
      await this.refreshAgreement();
    }
  }

  replay(): void {
    const audio = this.elements.audio;
    audio.currentTime = 0;
    void Promise.resolve(audio.play?.()).catch(() => undefined);
  }

  async refreshAgreement(): Promise<void> {
    try {
      const tables = await this.api.getAgreement();
      renderAgreement(this.elements.agreement, tables);
    } catch {
      // keep the previous table on transient failures
    }
  }

  bindInputs(doc: Document): void {
    const els = this.elements;
    els.correctButton.addEventListener('click', () => void this.judge('correct'));
    els.incorrectButton.addEventListener('click', () => void this.judge('incorrect'));
    els.replayButton.addEventListener('click', () => this.replay());
    els.retryButton.addEventListener('click', () => void this.retry());
    doc.addEventListener('keydown', (event) => {
      if (event.key === 'c') {
        void this.judge('correct');
      } else if (event.key === 'i') {
        void this.judge('incorrect');
      } else if (event.key === 'r') {
        this.replay();
      }
    });
  }
}

export async function bootstrap(doc: Document, api = new ReviewApi()): Promise<App> {
  const app = new App(collectElements(doc), api);
  app.bindInputs(doc);
  await app.start();
  return app;
}
