// @vitest-environment happy-dom
import { beforeEach, describe, expect, it, vi } from 'vitest';

import type { ApiClient } from '../src/api.js';
import { bootstrap } from '../src/main.js';
import type { UsagePage, UsageSummary } from '../src/types.js';

const SUMMARY: UsageSummary = {
    owner_id: 'alice',
    total_count: 105,
    per_consumer_counts: { carol: 60, dave: 30, erin: 15 },
    per_source_counts: { 'issue-tracker': 105 },
    weekly_buckets: [['2023-11-06', 105]],
    anomaly_scores: { carol: 60 },
};

const PAGE: UsagePage = {
    events: [
        {
            event_id: 'evt-1',
            consumer_id: 'carol',
            owner_ids: ['alice'],
            tool_id: 'analysis.leaderboard',
            data_source: 'issue-tracker',
            accessed_fields: ['issue.assignee'],
            purpose: 'planning',
            occurred_at: '2023-11-06T10:00:00.000Z',
            token_fingerprint: '0'.repeat(64),
            sequence: 0,
            prev_hash: '0'.repeat(64),
            entry_hash: 'a'.repeat(64),
        },
    ],
};

function stubClient(): ApiClient {
    return {
        summary: vi.fn(async () => SUMMARY),
        listUsages: vi.fn(async () => PAGE),
        listJustifications: vi.fn(async () => ({ requests: [] })),
        createJustification: vi.fn(async (eventId: string, message: string) => ({
            request_id: 'r1',
            event_id: eventId,
            owner_id: 'alice',
            message,
            status: 'open',
            created_at: '2023-11-07T08:00:00.000Z',
        })),
    } as unknown as ApiClient;
}

async function settle(rounds = 8): Promise<void> {
    for (let i = 0; i < rounds; i += 1) {
        await new Promise((resolve) => setTimeout(resolve, 0));
    }
}

function mount() {
    document.body.innerHTML = '<div id="app"></div>';
    const container = document.getElementById('app') as HTMLElement;
    const app = bootstrap({
        window: window as unknown as Window,
        container,
        apiBaseUrl: 'http://unused.test',
        clientFactory: () => stubClient(),
    });
    return { container, app };
}

async function loginViaForm(container: HTMLElement): Promise<void> {
    const input = container.querySelector('input[name=token]') as HTMLInputElement;
    input.value = 'pasted-token';
    const form = container.querySelector('form[data-action=login]') as HTMLFormElement;
    form.dispatchEvent(new Event('submit', { bubbles: true, cancelable: true }));
    await settle();
}

beforeEach(() => {
    window.location.hash = '';
});

describe('single-page app', () => {
    it('logs in from a pasted token and shows the dashboard', async () => {
        const { container } = mount();
        expect(container.querySelector('form[data-action=login]')).toBeTruthy();
        await loginViaForm(container);
        const total = container.querySelector('[data-field=total_count]');
        expect(total?.textContent).toBe('105');
    });

    it('navigates between all views with zero full-page reloads', async () => {
        const { container } = mount();
        await loginViaForm(container);

        let reloads = 0;
        Object.defineProperty(window.location, 'reload', {
            value: () => {
                reloads += 1;
            },
            configurable: true,
        });
        const originalDocument = document;
        (document as { __spaMarker?: number }).__spaMarker = 42;

        const clickNav = async (view: string) => {
            const link = container.querySelector(`[data-view=${view}]`) as HTMLElement;
            link.dispatchEvent(new MouseEvent('click', { bubbles: true, cancelable: true }));
            await settle();
        };

        await clickNav('events');
        expect(container.querySelector('.event-list')).toBeTruthy();
        expect(window.location.hash).toBe('#/events');

        await clickNav('justifications');
        expect(container.querySelector('.justifications')).toBeTruthy();

        await clickNav('dashboard');
        expect(container.querySelector('.dashboard')).toBeTruthy();

        expect(reloads).toBe(0);
        expect(document).toBe(originalDocument);
        expect((document as { __spaMarker?: number }).__spaMarker).toBe(42);
    });

    it('filter changes refetch without a reload', async () => {
        const { container, app } = mount();
        await loginViaForm(container);
        let reloads = 0;
        Object.defineProperty(window.location, 'reload', {
            value: () => {
                reloads += 1;
            },
            configurable: true,
        });
        window.location.hash = '#/events';
        await settle();
        const consumerInput = container.querySelector('input[name=consumer]') as HTMLInputElement;
        consumerInput.value = 'carol';
        const form = container.querySelector('form[data-action=filter]') as HTMLFormElement;
        form.dispatchEvent(new Event('submit', { bubbles: true, cancelable: true }));
        await settle();
        expect(app.store.getState().filter.consumer).toBe('carol');
        expect(reloads).toBe(0);
    });

    it('opens the justification dialog from an event and submits it', async () => {
        const { container, app } = mount();
        await loginViaForm(container);
        window.location.hash = '#/events';
        await settle();

        const ask = container.querySelector('[data-action=ask-justification]') as HTMLElement;
        ask.dispatchEvent(new MouseEvent('click', { bubbles: true, cancelable: true }));
        await settle();
        expect(container.querySelector('.dialog')).toBeTruthy();

        const textarea = container.querySelector('textarea[name=message]') as HTMLTextAreaElement;
        textarea.value = 'why was this needed?';
        const form = container.querySelector('form[data-action=submit-justification]') as HTMLFormElement;
        form.dispatchEvent(new Event('submit', { bubbles: true, cancelable: true }));
        await settle();

        expect(container.querySelector('.dialog')).toBeFalsy();
        const requests = app.store.getState().justifications;
        expect(requests).toHaveLength(1);
        expect(requests[0]!.status).toBe('open');
        expect(requests[0]!.event_id).toBe('evt-1');
    });

    it('sign out returns to login without reload', async () => {
        const { container } = mount();
        await loginViaForm(container);
        const logout = container.querySelector('[data-action=logout]') as HTMLElement;
        logout.dispatchEvent(new MouseEvent('click', { bubbles: true, cancelable: true }));
        await settle();
        expect(container.querySelector('form[data-action=login]')).toBeTruthy();
    });

    it('scrolling near the bottom of the usage list loads the next page', async () => {
        document.body.innerHTML = '<div id="app"></div>';
        const container = document.getElementById('app') as HTMLElement;
        const pages: UsagePage[] = [
            { events: PAGE.events, next_page_token: 'cursor-1' },
            { events: [{ ...PAGE.events[0]!, event_id: 'evt-2', sequence: 1 }] },
        ];
        const listUsages = vi.fn(async () => pages.shift() ?? { events: [] });
        const client = { ...stubClient(), listUsages } as unknown as ApiClient;
        const app = bootstrap({
            window: window as unknown as Window,
            container,
            apiBaseUrl: 'http://unused.test',
            clientFactory: () => client,
        });
        await loginViaForm(container);
        app.router.navigate('events');
        await settle();
        expect(app.store.getState().events).toHaveLength(1);

        window.dispatchEvent(new Event('scroll'));
        await settle();
        expect(app.store.getState().events.map((e) => e.event_id)).toEqual(['evt-1', 'evt-2']);
        expect(app.store.getState().nextPageToken).toBeUndefined();
    });
});
