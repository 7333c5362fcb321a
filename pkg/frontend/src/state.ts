/**
 * View state and data loading.
 *
 * Single store, immutable snapshots, subscriber notifications. Concurrent
 * fetches of the same resource are deduplicated, and every request carries a
 * generation number so a stale response can never overwrite a newer one.
 * All counts and events in the state came verbatim from the API.
 */

import { ApiClient, AuthError, NetworkError } from './api.js';
import type {
    JustificationRequest,
    UsageEvent,
    UsageFilter,
    UsageSummary,
} from './types.js';

export type View = 'dashboard' | 'events' | 'justifications';

export interface DialogState {
    eventId: string;
    message: string;
}

export interface ViewState {
    token: string | null;
    view: View;
    filter: UsageFilter;
    events: UsageEvent[];
    nextPageToken?: string;
    eventsLoading: boolean;
    summary?: UsageSummary;
    justifications: JustificationRequest[];
    dialog?: DialogState;
    /** Non-blocking banner text for transient failures; data stays visible. */
    banner?: string;
    loginError?: string;
}

const INITIAL: ViewState = {
    token: null,
    view: 'dashboard',
    filter: {},
    events: [],
    eventsLoading: false,
    justifications: [],
};

type Listener = (state: ViewState) => void;
type ClientFactory = (token: string) => ApiClient;

export class Store {
    private state: ViewState = INITIAL;
    private client: ApiClient | null = null;
    private listeners: Listener[] = [];
    private generations: Record<string, number> = {};
    private inflight: Map<string, Promise<void>> = new Map();

    constructor(private readonly clientFactory: ClientFactory) {}

    getState(): ViewState {
        return this.state;
    }

    subscribe(listener: Listener): () => void {
        this.listeners.push(listener);
        return () => {
            this.listeners = this.listeners.filter((l) => l !== listener);
        };
    }

    private setState(patch: Partial<ViewState>): void {
        this.state = { ...this.state, ...patch };
        for (const listener of this.listeners) listener(this.state);
    }

    /** Bump and return the generation for one resource kind. */
    private nextGeneration(kind: string): number {
        this.generations[kind] = (this.generations[kind] ?? 0) + 1;
        return this.generations[kind];
    }

    private isCurrent(kind: string, generation: number): boolean {
        return this.generations[kind] === generation;
    }

    // -- session -----------------------------------------------------------

    async login(token: string): Promise<void> {
        const trimmed = token.trim();
        if (!trimmed) {
            this.setState({ loginError: 'paste a token to sign in' });
            return;
        }
        this.client = this.clientFactory(trimmed);
        this.setState({ token: trimmed, loginError: undefined, banner: undefined });
        await this.refreshAll();
    }

    logout(message?: string): void {
        this.client = null;
        this.setState({ ...INITIAL, loginError: message });
    }

    // -- data loading --------------------------------------------------------

    async refreshAll(): Promise<void> {
        await Promise.all([this.loadSummary(), this.loadEvents(true), this.loadJustifications()]);
    }

    async loadSummary(): Promise<void> {
        await this.guarded('summary', async (client, generation) => {
            const summary = await client.summary(this.state.filter.from, this.state.filter.to);
            if (this.isCurrent('summary', generation)) this.setState({ summary });
        });
    }

    async loadEvents(reset: boolean): Promise<void> {
        const kind = 'events';
        if (!reset && !this.state.nextPageToken) return;
        const pageToken = reset ? undefined : this.state.nextPageToken;
        await this.guarded(kind, async (client, generation) => {
            this.setState({ eventsLoading: true });
            try {
                const page = await client.listUsages(this.state.filter, 50, pageToken);
                if (!this.isCurrent(kind, generation)) return;
                this.setState({
                    events: reset ? page.events : [...this.state.events, ...page.events],
                    nextPageToken: page.next_page_token,
                });
            } finally {
                if (this.isCurrent(kind, generation)) this.setState({ eventsLoading: false });
            }
        });
    }

    async loadJustifications(): Promise<void> {
        await this.guarded('justifications', async (client, generation) => {
            const body = await client.listJustifications();
            if (this.isCurrent('justifications', generation)) {
                this.setState({ justifications: body.requests });
            }
        });
    }

    /** Filter edits refetch list and summary; never a page reload. */
    async setFilter(filter: UsageFilter): Promise<void> {
        this.setState({ filter, events: [], nextPageToken: undefined });
        // in-flight responses for the old filter are now stale by generation
        this.invalidate('events');
        this.invalidate('summary');
        await Promise.all([this.loadEvents(true), this.loadSummary()]);
    }

    private invalidate(kind: string): void {
        this.nextGeneration(kind);
        this.inflight.delete(kind);
    }

    setView(view: View): void {
        this.setState({ view });
    }

    // -- justification dialog ------------------------------------------------

    openDialog(eventId: string): void {
        this.setState({ dialog: { eventId, message: '' } });
    }

    closeDialog(): void {
        this.setState({ dialog: undefined });
    }

    async submitJustificationRequest(message: string): Promise<void> {
        const dialog = this.state.dialog;
        const client = this.client;
        if (!dialog || !client) return;
        try {
            const created = await client.createJustification(dialog.eventId, message);
            // optimistic append: the request is open until an answer arrives
            this.setState({
                dialog: undefined,
                justifications: [...this.state.justifications, created],
            });
        } catch (error) {
            this.fail(error);
        }
    }

    // -- shared plumbing -------------------------------------------------------

    private async guarded(
        kind: string,
        work: (client: ApiClient, generation: number) => Promise<void>,
    ): Promise<void> {
        const client = this.client;
        if (!client) return;
        const existing = this.inflight.get(kind);
        if (existing) return existing;
        const generation = this.nextGeneration(kind);
        const task = (async () => {
            try {
                await work(client, generation);
                if (this.isCurrent(kind, generation) && this.state.banner) {
                    this.setState({ banner: undefined });
                }
            } catch (error) {
                this.fail(error);
            } finally {
                this.inflight.delete(kind);
            }
        })();
        this.inflight.set(kind, task);
        return task;
    }

    private fail(error: unknown): void {
        if (error instanceof AuthError) {
            this.logout('session rejected; sign in again');
            return;
        }
        if (error instanceof NetworkError) {
            this.setState({ banner: 'safekeeper unreachable; data may be stale. retrying on next action.' });
            return;
        }
        this.setState({ banner: error instanceof Error ? error.message : String(error) });
    }
}
