/**
 * App bootstrap: store + router + event delegation on one container.
 *
 * Exported as a function so tests can mount the whole app against any DOM
 * and API endpoint; index.html calls it with the real document.
 */

import { ApiClient } from './api.js';
import { renderApp } from './render.js';
import { Router } from './router.js';
import { Store } from './state.js';

export interface BootstrapOptions {
    window: Window;
    container: HTMLElement;
    apiBaseUrl: string;
    clientFactory?: (token: string) => ApiClient;
}

export interface App {
    store: Store;
    router: Router;
}

export function bootstrap(options: BootstrapOptions): App {
    const { window: win, container, apiBaseUrl } = options;
    const factory = options.clientFactory ?? ((token: string) => new ApiClient(apiBaseUrl, token));
    const store = new Store(factory);
    const router = new Router(win, (view) => store.setView(view));

    store.subscribe((state) => {
        container.innerHTML = renderApp(state);
    });
    container.innerHTML = renderApp(store.getState());

    container.addEventListener('click', (raw) => {
        const target = raw.target as HTMLElement | null;
        if (!target) return;
        const actor = target.closest<HTMLElement>('[data-action], [data-view]');
        if (!actor) return;
        const view = actor.dataset['view'];
        if (view) {
            raw.preventDefault();
            router.navigate(view as never);
            return;
        }
        switch (actor.dataset['action']) {
            case 'logout':
                store.logout();
                break;
            case 'retry':
                void store.refreshAll();
                break;
            case 'load-more':
                void store.loadEvents(false);
                break;
            case 'ask-justification':
                store.openDialog(actor.dataset['eventId'] ?? '');
                break;
            case 'clear-filter':
                void store.setFilter({});
                break;
            case 'close-dialog':
                // the backdrop closes only when clicked directly, so clicks
                // inside the dialog body don't dismiss it; the cancel button
                // always closes
                if (raw.target === actor || actor.tagName === 'BUTTON') {
                    store.closeDialog();
                }
                break;
        }
    });

    container.addEventListener('submit', (raw) => {
        const form = raw.target as HTMLFormElement | null;
        if (!form || !form.dataset['action']) return;
        raw.preventDefault();
        const data = new FormData(form);
        switch (form.dataset['action']) {
            case 'login':
                void store.login(String(data.get('token') ?? ''));
                break;
            case 'filter':
                void store.setFilter({
                    consumer: String(data.get('consumer') ?? '') || undefined,
                    source: String(data.get('source') ?? '') || undefined,
                });
                break;
            case 'submit-justification':
                void store.submitJustificationRequest(String(data.get('message') ?? ''));
                break;
        }
    });

    // infinite scroll: nearing the bottom of the usage list pulls the next page
    win.addEventListener('scroll', () => {
        const state = store.getState();
        if (state.view !== 'events' || !state.nextPageToken || state.eventsLoading) return;
        const doc = win.document.documentElement;
        const remaining = doc.scrollHeight - (win.scrollY + win.innerHeight);
        if (remaining < 400) void store.loadEvents(false);
    });

    router.start();
    return { store, router };
}
