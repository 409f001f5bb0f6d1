"""Embedded HTTP interface: run listing, ledgers, and flag resolution.

The service holds no state of its own; every request re-reads the ledgers
under the configured root, and every mutation goes through the same
resolve path the CLI uses, so the ledger stays the single authority.

    python -m spiralflow.api --root runs/ --port 8800
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass
from pathlib import Path

from fastapi import Depends, FastAPI, HTTPException, Query, Request
from pydantic import BaseModel

from . import ledger as lg
from .engine import (
    AWAITING_FLAG,
    RunState,
    find_run,
    find_runs,
    resolve_manual_flag,
    resume,
)
from .errors import (
    CorruptLedger,
    InvalidDecision,
    InvalidTraverseTarget,
    NotAwaitingFlag,
    SpiralError,
    UnknownRun,
)
from .flags import CONTINUE, FORCED_EXIT, PERIODIC_EXIT, TRAVERSE_BACK, TRUE_EXIT, parse_decision

DETAIL_EVENT_LIMIT = 100


@dataclass(frozen=True)
class ApiConfig:
    root: Path
    host: str = "127.0.0.1"
    port: int = 8800
    token: str | None = None


class ResolveBody(BaseModel):
    decision: str
    resolver: str = "api-operator"


def _load_states(root: Path) -> list[RunState]:
    states = []
    for workdir in find_runs(root):
        try:
            states.append(resume(workdir))
        except (CorruptLedger, UnknownRun):
            continue  # unreadable runs are skipped, not fatal to the listing
    return states


def _available_decisions(state: RunState) -> list[str]:
    # At the budget boundary anything that would start another revolution
    # is rejected by the engine, so don't offer it.
    if state.revolution >= state.spec.max_revolutions:
        return [TRUE_EXIT, FORCED_EXIT]
    return [CONTINUE, TRAVERSE_BACK, PERIODIC_EXIT, TRUE_EXIT]


def _pending_entry(state: RunState) -> dict:
    return {
        "run_id": state.run_id,
        "revolution": state.revolution,
        "context": state.awaiting_context,
        "available_decisions": _available_decisions(state),
        "stages": state.spec.stage_names(),
        "workdir": str(state.workdir),
    }


def create_app(config: ApiConfig) -> FastAPI:
    app = FastAPI(title="spiral runs", version="1")
    root = Path(config.root)

    def require_token(request: Request) -> None:
        if config.token is None:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {config.token}":
            raise HTTPException(status_code=401, detail="missing or invalid bearer token")

    def workdir_of(run_id: str) -> Path:
        try:
            return find_run(root, run_id)
        except UnknownRun:
            raise HTTPException(status_code=404, detail=f"no run {run_id!r}")

    @app.get("/runs")
    def list_runs() -> list[dict]:
        out = []
        for state in _load_states(root):
            summary = state.summary()
            events = lg.read_ledger(lg.ledger_path(state.workdir))
            resolved = [e for e in events if e.kind == lg.FLAG_RESOLVED]
            summary["last_decision"] = (
                resolved[-1].payload["decision"]["kind"] if resolved else None
            )
            out.append(summary)
        return out

    @app.get("/runs/{run_id}")
    def run_detail(run_id: str) -> dict:
        workdir = workdir_of(run_id)
        state = resume(workdir)
        events = lg.read_ledger(lg.ledger_path(workdir))
        doc = state.summary()
        doc["spec_digest"] = state.spec_digest
        doc["stages"] = state.spec.stage_names()
        doc["metrics"] = {
            name: mv.to_json() for name, mv in sorted(state.snapshot.items())
        }
        if state.status == AWAITING_FLAG:
            doc["pending"] = _pending_entry(state)
        doc["events"] = [e.to_json() for e in events[-DETAIL_EVENT_LIMIT:]]
        return doc

    @app.get("/runs/{run_id}/ledger")
    def run_ledger(
        run_id: str, from_seq: int = Query(default=1, alias="from", ge=1)
    ) -> dict:
        workdir = workdir_of(run_id)
        events = lg.read_ledger(lg.ledger_path(workdir))
        return {
            "run_id": run_id,
            "from": from_seq,
            "events": [e.to_json() for e in events if e.sequence >= from_seq],
        }

    @app.get("/pending-flags")
    def pending_flags() -> list[dict]:
        return [
            _pending_entry(state)
            for state in _load_states(root)
            if state.status == AWAITING_FLAG
        ]

    @app.post("/runs/{run_id}/resolve", dependencies=[Depends(require_token)])
    def resolve(run_id: str, body: ResolveBody) -> dict:
        workdir = workdir_of(run_id)
        try:
            decision = parse_decision(body.decision)
        except (SpiralError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        try:
            state = resolve_manual_flag(workdir, decision, resolver=body.resolver)
        except NotAwaitingFlag as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except (InvalidTraverseTarget, InvalidDecision) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except UnknownRun as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return {**state.summary(), "decision": decision.to_json(), "resolver": body.resolver}

    return app


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="python -m spiralflow.api",
        description="Serve run state and flag resolution over HTTP.",
    )
    parser.add_argument("--root", required=True, help="directory containing run workdirs")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8800)
    parser.add_argument("--token", default=None, help="require this bearer token on mutations")
    args = parser.parse_args(argv)

    import uvicorn

    config = ApiConfig(Path(args.root), args.host, args.port, args.token)
    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
