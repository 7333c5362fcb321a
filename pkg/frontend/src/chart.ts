/**
 * Weekly time-series chart as inline SVG.
 *
 * Pure string generation: bar heights are proportional to the counts the
 * API returned, and every bar is labeled with its exact count so the graph
 * never shows a number that differs from the data.
 */

import { escapeHtml, formatCount, formatWeekLabel } from './format.js';
import type { WeeklyBucket } from './types.js';

const WIDTH = 640;
const HEIGHT = 220;
const MARGIN = { top: 24, right: 16, bottom: 34, left: 16 };

export function weeklyChartSvg(buckets: WeeklyBucket[]): string {
    if (buckets.length === 0) {
        return `<svg class="weekly-chart" viewBox="0 0 ${WIDTH} ${HEIGHT}" role="img" aria-label="weekly usage">`
            + `<text x="${WIDTH / 2}" y="${HEIGHT / 2}" text-anchor="middle" class="chart-empty">no usage in this window</text>`
            + `</svg>`;
    }
    const plotWidth = WIDTH - MARGIN.left - MARGIN.right;
    const plotHeight = HEIGHT - MARGIN.top - MARGIN.bottom;
    const max = Math.max(...buckets.map(([, count]) => count), 1);
    const slot = plotWidth / buckets.length;
    const barWidth = Math.min(slot * 0.6, 64);

    const bars = buckets
        .map(([week, count], index) => {
            const height = (count / max) * plotHeight;
            const x = MARGIN.left + slot * index + (slot - barWidth) / 2;
            const y = MARGIN.top + plotHeight - height;
            const center = x + barWidth / 2;
            const label = buckets.length <= 10
                ? `<text x="${center}" y="${HEIGHT - 12}" text-anchor="middle" class="chart-week">${escapeHtml(formatWeekLabel(week))}</text>`
                : '';
            return (
                `<g data-week="${escapeHtml(week)}" data-count="${count}">`
                + `<rect x="${x.toFixed(1)}" y="${y.toFixed(1)}" width="${barWidth.toFixed(1)}" height="${height.toFixed(1)}" class="chart-bar" rx="3"></rect>`
                + `<text x="${center}" y="${(y - 6).toFixed(1)}" text-anchor="middle" class="chart-value">${formatCount(count)}</text>`
                + label
                + `</g>`
            );
        })
        .join('');

    return (
        `<svg class="weekly-chart" viewBox="0 0 ${WIDTH} ${HEIGHT}" role="img" aria-label="weekly usage">`
        + `<line x1="${MARGIN.left}" y1="${MARGIN.top + plotHeight}" x2="${WIDTH - MARGIN.right}" y2="${MARGIN.top + plotHeight}" class="chart-axis"></line>`
        + bars
        + `</svg>`
    );
}
