/**
 * Pure render functions: state in, HTML string out.
 *
 * Every number in the markup is copied from API response fields; rendering
 * never aggregates, rounds counts, or invents values. Layout is a single
 * scrolling page: a symmetric two-column summary with large totals, the
 * weekly graph centered, then the event list and justification panels.
 */

import { weeklyChartSvg } from './chart.js';
import {
    escapeHtml,
    formatCount,
    formatScore,
    formatTimestamp,
} from './format.js';
import type { ViewState } from './state.js';
import type { JustificationRequest, UsageEvent, UsageSummary } from './types.js';
import { ANOMALY_BADGE_THRESHOLD } from './types.js';

export function renderApp(state: ViewState): string {
    if (!state.token) return renderLogin(state);
    return `
<div class="app">
  ${renderBanner(state)}
  <header class="top">
    <h1>data usage transparency</h1>
    <nav class="views">
      ${navLink('dashboard', 'Dashboard', state)}
      ${navLink('events', 'Usages', state)}
      ${navLink('justifications', 'Justifications', state)}
    </nav>
    <button class="linkish" data-action="logout">sign out</button>
  </header>
  <main>
    ${state.view === 'dashboard' ? renderDashboard(state) : ''}
    ${state.view === 'events' ? renderEvents(state) : ''}
    ${state.view === 'justifications' ? renderJustifications(state) : ''}
  </main>
  ${state.dialog ? renderDialog(state) : ''}
</div>`;
}

function navLink(view: string, label: string, state: ViewState): string {
    const active = state.view === view ? ' active' : '';
    return `<a href="#/${view}" class="nav-link${active}" data-view="${view}">${label}</a>`;
}

export function renderLogin(state: ViewState): string {
    const error = state.loginError
        ? `<p class="login-error">${escapeHtml(state.loginError)}</p>`
        : '';
    return `
<div class="login">
  <h1>data usage transparency</h1>
  <p>paste your owner token to see who used your data</p>
  <form data-action="login">
    <input type="password" name="token" placeholder="token" autocomplete="off">
    <button type="submit">sign in</button>
  </form>
  ${error}
</div>`;
}

function renderBanner(state: ViewState): string {
    if (!state.banner) return '';
    return `<div class="banner" role="alert">${escapeHtml(state.banner)} <button class="linkish" data-action="retry">retry now</button></div>`;
}

export function renderDashboard(state: ViewState): string {
    const summary = state.summary;
    if (!summary) return `<section class="dashboard"><p class="loading">loading summary…</p></section>`;
    return `
<section class="dashboard">
  <div class="totals symmetric">
    <div class="big-number">
      <span class="value" data-field="total_count">${formatCount(summary.total_count)}</span>
      <span class="label">usages of your data</span>
    </div>
    <div class="big-number">
      <span class="value" data-field="consumer_count">${formatCount(Object.keys(summary.per_consumer_counts).length)}</span>
      <span class="label">distinct consumers</span>
    </div>
  </div>
  <div class="chart-holder centered">${weeklyChartSvg(summary.weekly_buckets)}</div>
  <div class="breakdowns symmetric">
    <div class="panel">
      <h2>by consumer</h2>
      ${renderConsumerTable(summary)}
    </div>
    <div class="panel">
      <h2>by source</h2>
      ${renderSourceTable(summary)}
    </div>
  </div>
</section>`;
}

function renderConsumerTable(summary: UsageSummary): string {
    const rows = Object.entries(summary.per_consumer_counts)
        .sort(([, a], [, b]) => b - a)
        .map(([consumer, count]) => {
            const score = summary.anomaly_scores[consumer];
            const badge =
                score !== undefined && score > ANOMALY_BADGE_THRESHOLD
                    ? ` <span class="badge anomalous" title="unusual volume vs history">unusual: ${formatScore(score)}</span>`
                    : '';
            return `<tr data-consumer="${escapeHtml(consumer)}"><td>${escapeHtml(consumer)}${badge}</td><td class="count" data-count="${count}">${formatCount(count)}</td></tr>`;
        })
        .join('');
    return rows
        ? `<table class="counts"><tbody>${rows}</tbody></table>`
        : `<p class="empty">nobody has used your data in this window</p>`;
}

function renderSourceTable(summary: UsageSummary): string {
    const rows = Object.entries(summary.per_source_counts)
        .sort(([, a], [, b]) => b - a)
        .map(
            ([source, count]) =>
                `<tr data-source="${escapeHtml(source)}"><td>${escapeHtml(source)}</td><td class="count" data-count="${count}">${formatCount(count)}</td></tr>`,
        )
        .join('');
    return rows
        ? `<table class="counts"><tbody>${rows}</tbody></table>`
        : `<p class="empty">no sources in this window</p>`;
}

export function renderEvents(state: ViewState): string {
    const filter = state.filter;
    const rows = state.events.map(renderEventRow).join('');
    const more = state.nextPageToken
        ? `<button data-action="load-more" class="load-more">${state.eventsLoading ? 'loading…' : 'load more'}</button>`
        : state.events.length
          ? `<p class="list-end">end of log</p>`
          : '';
    return `
<section class="events">
  <form class="filters" data-action="filter">
    <input name="consumer" placeholder="filter by consumer" value="${escapeHtml(filter.consumer ?? '')}">
    <input name="source" placeholder="filter by source" value="${escapeHtml(filter.source ?? '')}">
    <button type="submit">apply</button>
    <button type="button" data-action="clear-filter" class="linkish">clear</button>
  </form>
  ${state.events.length === 0 && !state.eventsLoading ? '<p class="empty">no usages match</p>' : ''}
  <ul class="event-list">${rows}</ul>
  ${more}
</section>`;
}

function renderEventRow(event: UsageEvent): string {
    const fields = event.accessed_fields.length
        ? `<span class="fields">${event.accessed_fields.map(escapeHtml).join(', ')}</span>`
        : '';
    const purpose = event.purpose
        ? `<span class="purpose">&ldquo;${escapeHtml(event.purpose)}&rdquo;</span>`
        : '';
    return `
<li class="event" data-event-id="${escapeHtml(event.event_id)}" data-sequence="${event.sequence}">
  <div class="event-main">
    <strong>${escapeHtml(event.consumer_id)}</strong>
    <span>used <strong>${escapeHtml(event.data_source)}</strong> via ${escapeHtml(event.tool_id)}</span>
    ${fields} ${purpose}
  </div>
  <div class="event-side">
    <time>${escapeHtml(formatTimestamp(event.occurred_at))}</time>
    <button class="linkish" data-action="ask-justification" data-event-id="${escapeHtml(event.event_id)}">ask why</button>
  </div>
</li>`;
}

export function renderJustifications(state: ViewState): string {
    const rows = state.justifications.map(renderJustificationRow).join('');
    return `
<section class="justifications">
  <h2>your justification requests</h2>
  ${rows ? `<ul class="justification-list">${rows}</ul>` : '<p class="empty">none yet; use &ldquo;ask why&rdquo; on a usage</p>'}
</section>`;
}

function renderJustificationRow(request: JustificationRequest): string {
    const answer =
        request.status === 'answered'
            ? `<p class="answer">answer: ${escapeHtml(request.response ?? '')}</p>`
            : `<p class="pending">awaiting an answer</p>`;
    return `
<li class="justification" data-request-id="${escapeHtml(request.request_id)}" data-status="${request.status}">
  <span class="status ${request.status}">${request.status}</span>
  <span class="event-ref">${escapeHtml(request.event_id)}</span>
  <p class="message">${escapeHtml(request.message)}</p>
  ${answer}
</li>`;
}

function renderDialog(state: ViewState): string {
    const dialog = state.dialog;
    if (!dialog) return '';
    return `
<div class="dialog-backdrop" data-action="close-dialog">
  <div class="dialog" role="dialog" aria-modal="true">
    <h2>ask for justification</h2>
    <p>usage <code>${escapeHtml(dialog.eventId)}</code></p>
    <form data-action="submit-justification">
      <textarea name="message" rows="3" placeholder="what would you like explained?"></textarea>
      <div class="dialog-buttons">
        <button type="button" class="linkish" data-action="close-dialog">cancel</button>
        <button type="submit">send</button>
      </div>
    </form>
  </div>
</div>`;
}
