"""HTTP/JSON wire protocol for the safekeeper.

Every endpoint except ``/v1/health`` requires ``Authorization: Bearer
<token>``. Domain errors surface as ``{"error": {"code", "message"}}`` with
the status the error class carries. Endpoints are synchronous on purpose:
the service layer relies on locks and per-append fsync, so requests run in
the server's worker threads, not on the event loop.
"""

from __future__ import annotations

import re
from typing import Optional

from fastapi import Body, FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .model import ms_to_rfc3339, rfc3339_to_ms
from .service import (
    BadPageToken,
    InvalidQuery,
    Safekeeper,
    SafekeeperError,
    Unauthorized,
    UsageQuery,
)
from .wire import event_to_dict, justification_to_dict, parse_report, ReportValidationError

__all__ = ["create_app", "parse_iso_duration"]

_DURATION_RE = re.compile(
    r"^P(?:(?P<weeks>\d+)W)?(?:(?P<days>\d+)D)?"
    r"(?:T(?:(?P<hours>\d+)H)?(?:(?P<minutes>\d+)M)?(?:(?P<seconds>\d+(?:\.\d+)?)S)?)?$"
)


def parse_iso_duration(text: str) -> int:
    """ISO-8601 duration (weeks/days/time parts) to milliseconds."""
    match = _DURATION_RE.match(text or "")
    if not match or not any(match.groups()):
        raise ValueError(f"not an ISO-8601 duration: {text!r}")
    parts = {k: float(v) if v else 0.0 for k, v in match.groupdict().items()}
    seconds = (
        parts["weeks"] * 7 * 86400
        + parts["days"] * 86400
        + parts["hours"] * 3600
        + parts["minutes"] * 60
        + parts["seconds"]
    )
    return int(round(seconds * 1000))


def _bearer_token(request: Request) -> str:
    header = request.headers.get("authorization", "")
    scheme, _, token = header.partition(" ")
    if scheme.lower() != "bearer" or not token.strip():
        raise Unauthorized("missing bearer token")
    return token.strip()


def _optional_ms(value: Optional[str], name: str) -> Optional[int]:
    if value is None or value == "":
        return None
    try:
        return rfc3339_to_ms(value)
    except ValueError as exc:
        raise InvalidQuery(f"{name} must be an RFC 3339 timestamp") from exc


def _optional_int(value: Optional[str], name: str, default: int) -> int:
    if value is None or value == "":
        return default
    try:
        return int(value)
    except ValueError as exc:
        raise InvalidQuery(f"{name} must be an integer") from exc


def create_app(safekeeper: Safekeeper) -> FastAPI:
    app = FastAPI(title="clearbox safekeeper", docs_url=None, redoc_url=None)

    @app.exception_handler(SafekeeperError)
    async def _domain_error(_request: Request, exc: SafekeeperError) -> JSONResponse:
        return JSONResponse(
            status_code=exc.http_status,
            content={"error": {"code": exc.code, "message": str(exc)}},
        )

    @app.exception_handler(RequestValidationError)
    async def _body_error(request: Request, exc: RequestValidationError) -> JSONResponse:
        code = "invalid_report" if request.url.path.endswith("/usages") else "invalid_query"
        return JSONResponse(
            status_code=422,
            content={"error": {"code": code, "message": "unreadable request body"}},
        )

    @app.get("/v1/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/v1/usages")
    def log_usage(request: Request, payload: dict = Body(...)) -> JSONResponse:
        token = _bearer_token(request)
        try:
            report = parse_report(payload)
        except ReportValidationError as exc:
            return JSONResponse(
                status_code=422,
                content={"error": {"code": "invalid_report", "message": str(exc)}},
            )
        event, created = safekeeper.log_usage(token, report)
        return JSONResponse(status_code=201 if created else 200, content=event_to_dict(event))

    @app.get("/v1/usages")
    def query_usages(
        request: Request,
        from_: Optional[str] = Query(None, alias="from"),
        to: Optional[str] = Query(None),
        consumer: Optional[str] = Query(None),
        source: Optional[str] = Query(None),
        page_size: Optional[str] = Query(None),
        page_token: Optional[str] = Query(None),
    ) -> dict:
        token = _bearer_token(request)
        query = UsageQuery(
            from_ms=_optional_ms(from_, "from"),
            to_ms=_optional_ms(to, "to"),
            consumer_id=consumer or None,
            data_source=source or None,
            page_size=_optional_int(page_size, "page_size", 100),
            page_token=page_token or None,
        )
        page = safekeeper.query_usages(token, query)
        body: dict = {"events": [event_to_dict(e) for e in page.events]}
        if page.next_page_token is not None:
            body["next_page_token"] = page.next_page_token
        return body

    @app.get("/v1/summary")
    def summary(
        request: Request,
        from_: Optional[str] = Query(None, alias="from"),
        to: Optional[str] = Query(None),
    ) -> dict:
        token = _bearer_token(request)
        result = safekeeper.summarize(token, _optional_ms(from_, "from"), _optional_ms(to, "to"))
        body: dict = {
            "owner_id": result.owner_id,
            "total_count": result.total_count,
            "per_consumer_counts": result.per_consumer_counts,
            "per_source_counts": result.per_source_counts,
            "weekly_buckets": [[week, count] for week, count in result.weekly_buckets],
            "anomaly_scores": result.anomaly_scores,
        }
        if result.from_ms is not None:
            body["from"] = ms_to_rfc3339(result.from_ms)
        if result.to_ms is not None:
            body["to"] = ms_to_rfc3339(result.to_ms)
        return body

    @app.get("/v1/anomalies")
    def anomalies(
        request: Request,
        window: Optional[str] = Query(None),
        history: Optional[str] = Query(None),
    ) -> dict:
        token = _bearer_token(request)
        window_ms = 7 * 24 * 3600 * 1000
        if window:
            try:
                window_ms = parse_iso_duration(window)
            except ValueError as exc:
                raise InvalidQuery(str(exc)) from exc
        scores = safekeeper.anomaly_scores(
            token, window_ms, _optional_int(history, "history", 4)
        )
        return {"scores": scores}

    @app.get("/v1/integrity")
    def integrity(request: Request) -> dict:
        return safekeeper.verify_integrity(_bearer_token(request)).to_dict()

    @app.post("/v1/justifications")
    def create_justification(request: Request, payload: dict = Body(...)) -> JSONResponse:
        token = _bearer_token(request)
        event_id = payload.get("event_id")
        message = payload.get("message", "")
        if not isinstance(event_id, str) or not event_id or not isinstance(message, str):
            raise InvalidQuery("body must carry event_id (nonempty) and message (string)")
        created = safekeeper.create_justification_request(token, event_id, message)
        return JSONResponse(status_code=201, content=justification_to_dict(created))

    @app.get("/v1/justifications")
    def list_justifications(request: Request) -> dict:
        token = _bearer_token(request)
        requests = safekeeper.list_justification_requests(token)
        return {"requests": [justification_to_dict(r) for r in requests]}

    @app.post("/v1/justifications/{request_id}/answer")
    def answer_justification(
        request: Request, request_id: str, payload: dict = Body(...)
    ) -> dict:
        token = _bearer_token(request)
        response = payload.get("response")
        if not isinstance(response, str):
            raise InvalidQuery("body must carry a response string")
        answered = safekeeper.answer_justification_request(token, request_id, response)
        return justification_to_dict(answered)

    return app
