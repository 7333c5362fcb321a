/** Small display helpers shared by the render functions. */

export function escapeHtml(text: string): string {
    return text
        .replace(/&/g, '&amp;')
        .replace(/</g, '&lt;')
        .replace(/>/g, '&gt;')
        .replace(/"/g, '&quot;')
        .replace(/'/g, '&#39;');
}

/** Counts are rendered exactly as received; only thousands separators added. */
export function formatCount(value: number): string {
    return value.toLocaleString('en-US');
}

export function formatScore(value: number): string {
    return value.toFixed(2);
}

/** RFC 3339 timestamp -> compact UTC display, second precision. */
export function formatTimestamp(rfc3339: string): string {
    const match = rfc3339.match(/^(\d{4}-\d{2}-\d{2})T(\d{2}:\d{2}:\d{2})/);
    return match ? `${match[1]} ${match[2]} UTC` : rfc3339;
}

export function formatWeekLabel(isoMonday: string): string {
    return `wk of ${isoMonday}`;
}
