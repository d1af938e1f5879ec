/** Thin typed client for the review service; fetch is injectable for tests. */

import type {
  AgreementTables,
  JudgmentAck,
  NextResponse,
  PendingJudgment,
  SessionInfo,
} from './types.js';

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = 'ApiError';
  }
}

export class ReviewApi {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path);
    if (!response.ok) {
      throw new ApiError(response.status, `GET ${path} failed: ${response.status}`);
    }
    return (await response.json()) as T;
  }

  getSession(): Promise<SessionInfo> {
    return this.get('/api/session');
  }

  getNext(): Promise<NextResponse> {
    return this.get('/api/next');
  }

  getAgreement(): Promise<AgreementTables> {
    return this.get('/api/agreement');
  }

  async postJudgment(judgment: PendingJudgment): Promise<JudgmentAck> {
    const response = await this.fetchFn(this.baseUrl + '/api/judgment', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(judgment),
    });
    if (!response.ok) {
      throw new ApiError(response.status, `POST /api/judgment failed: ${response.status}`);
    }
    return (await response.json()) as JudgmentAck;
  }
}
