/**
 * Hash-based view switching. Navigation only ever touches location.hash and
 * re-renders into the app container; there is no full document load anywhere
 * on the path.
 */

import type { View } from './state.js';

const VIEWS: View[] = ['dashboard', 'events', 'justifications'];

export function parseHash(hash: string): View {
    const name = hash.replace(/^#\/?/, '');
    return (VIEWS as string[]).includes(name) ? (name as View) : 'dashboard';
}

export class Router {
    constructor(
        private readonly window: Window,
        private readonly onView: (view: View) => void,
    ) {}

    start(): void {
        this.window.addEventListener('hashchange', () => {
            this.onView(parseHash(this.window.location.hash));
        });
        this.onView(parseHash(this.window.location.hash));
    }

    navigate(view: View): void {
        if (parseHash(this.window.location.hash) === view) {
            this.onView(view);
            return;
        }
        this.window.location.hash = `#/${view}`;
    }
}
