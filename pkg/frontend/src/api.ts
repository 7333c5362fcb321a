/**
 * Typed client for the safekeeper API.
 *
 * Owner scoping is the server's job: requests carry only the bearer token,
 * never an owner id parameter. 401 responses surface as AuthError so the
 * app can drop back to login; transport problems surface as NetworkError so
 * the app can show a retry banner without discarding data.
 */

import type {
    JustificationRequest,
    UsageFilter,
    UsagePage,
    UsageSummary,
    VerificationReport,
} from './types.js';

export class ApiError extends Error {
    constructor(
        readonly status: number,
        readonly code: string,
        message: string,
    ) {
        super(message);
    }
}

export class AuthError extends ApiError {}

export class NetworkError extends Error {}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
    private readonly baseUrl: string;

    constructor(
        baseUrl: string,
        private readonly token: string,
        private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
    ) {
        this.baseUrl = baseUrl.replace(/\/+$/, '');
    }

    async health(): Promise<{ status: string }> {
        return this.request('GET', '/v1/health', undefined, false);
    }

    async listUsages(filter: UsageFilter, pageSize?: number, pageToken?: string): Promise<UsagePage> {
        const params = new URLSearchParams();
        if (filter.from) params.set('from', filter.from);
        if (filter.to) params.set('to', filter.to);
        if (filter.consumer) params.set('consumer', filter.consumer);
        if (filter.source) params.set('source', filter.source);
        if (pageSize !== undefined) params.set('page_size', String(pageSize));
        if (pageToken) params.set('page_token', pageToken);
        const query = params.toString();
        return this.request('GET', `/v1/usages${query ? `?${query}` : ''}`);
    }

    async summary(from?: string, to?: string): Promise<UsageSummary> {
        const params = new URLSearchParams();
        if (from) params.set('from', from);
        if (to) params.set('to', to);
        const query = params.toString();
        return this.request('GET', `/v1/summary${query ? `?${query}` : ''}`);
    }

    async anomalies(window?: string, history?: number): Promise<{ scores: Record<string, number> }> {
        const params = new URLSearchParams();
        if (window) params.set('window', window);
        if (history !== undefined) params.set('history', String(history));
        const query = params.toString();
        return this.request('GET', `/v1/anomalies${query ? `?${query}` : ''}`);
    }

    async integrity(): Promise<VerificationReport> {
        return this.request('GET', '/v1/integrity');
    }

    async listJustifications(): Promise<{ requests: JustificationRequest[] }> {
        return this.request('GET', '/v1/justifications');
    }

    async createJustification(eventId: string, message: string): Promise<JustificationRequest> {
        return this.request('POST', '/v1/justifications', { event_id: eventId, message });
    }

    async answerJustification(requestId: string, response: string): Promise<JustificationRequest> {
        return this.request('POST', `/v1/justifications/${encodeURIComponent(requestId)}/answer`, {
            response,
        });
    }

    private async request<T>(
        method: string,
        path: string,
        body?: unknown,
        authenticated = true,
    ): Promise<T> {
        const headers: Record<string, string> = {};
        if (authenticated) headers['Authorization'] = `Bearer ${this.token}`;
        if (body !== undefined) headers['Content-Type'] = 'application/json';
        let response: Response;
        try {
            response = await this.fetchFn(`${this.baseUrl}${path}`, {
                method,
                headers,
                body: body === undefined ? undefined : JSON.stringify(body),
            });
        } catch (cause) {
            throw new NetworkError(`safekeeper unreachable: ${String(cause)}`);
        }
        if (response.ok) {
            return (await response.json()) as T;
        }
        let code = 'error';
        let message = `HTTP ${response.status}`;
        try {
            const parsed = (await response.json()) as { error?: { code?: string; message?: string } };
            code = parsed.error?.code ?? code;
            message = parsed.error?.message ?? message;
        } catch {
            // non-JSON error body; keep the status text
        }
        if (response.status === 401) throw new AuthError(401, code, message);
        throw new ApiError(response.status, code, message);
    }
}
