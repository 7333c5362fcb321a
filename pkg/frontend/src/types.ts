/**
 * Wire types for the safekeeper HTTP/JSON API.
 *
 * Timestamps are RFC 3339 UTC strings, digests lowercase hex. These mirror
 * the server responses exactly; the dashboard never fabricates or rescales
 * a number it did not receive.
 */

export type Role = 'owner' | 'consumer' | 'admin';

export interface UsageEvent {
    event_id: string;
    consumer_id: string;
    owner_ids: string[];
    tool_id: string;
    data_source: string;
    accessed_fields: string[];
    purpose: string;
    occurred_at: string;
    token_fingerprint: string;
    sequence: number;
    prev_hash: string;
    entry_hash: string;
}

export interface UsagePage {
    events: UsageEvent[];
    next_page_token?: string;
}

/** Weekly bucket: [ISO date of the week's Monday, count]. */
export type WeeklyBucket = [string, number];

export interface UsageSummary {
    owner_id: string;
    from?: string;
    to?: string;
    total_count: number;
    per_consumer_counts: Record<string, number>;
    per_source_counts: Record<string, number>;
    weekly_buckets: WeeklyBucket[];
    anomaly_scores: Record<string, number>;
}

export interface VerificationReport {
    valid: boolean;
    checked_count: number;
    first_bad_sequence?: number;
    reason?: string;
}

export type JustificationStatus = 'open' | 'answered';

export interface JustificationRequest {
    request_id: string;
    event_id: string;
    owner_id: string;
    message: string;
    status: JustificationStatus;
    created_at: string;
    response?: string;
    answered_at?: string;
}

export interface UsageFilter {
    from?: string;
    to?: string;
    consumer?: string;
    source?: string;
}

/** A consumer's score above this is flagged as anomalous in the UI. */
export const ANOMALY_BADGE_THRESHOLD = 3;
