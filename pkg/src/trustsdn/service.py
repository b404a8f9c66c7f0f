"""HTTP service around the simulator.

Endpoints take the scenario file text verbatim, so the service and the
CLI share one ingestion path. Runs are synchronous: a request returns
when the simulation finishes.
"""

import logging
from dataclasses import replace as dc_replace
from typing import Dict, List, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__, runner
from .scenario import ParseError, ValidationError, parse_scenario, validate_scenario
from .topology import InvalidSpec

logger = logging.getLogger(__name__)


class ValidateRequest(BaseModel):
    text: str


class ValidateResponse(BaseModel):
    valid: bool
    problems: List[str] = []
    name: Optional[str] = None
    n_hosts: Optional[int] = None


class RunRequest(BaseModel):
    text: str
    seed: Optional[int] = None
    include_trace: bool = False


class KpiModel(BaseModel):
    n_hosts: int
    fallback_delay_us: Optional[float] = None
    flow_install_us: Optional[float] = None
    trust_transition_us: Optional[float] = None
    loss_primary: float
    loss_fallback: float
    loss_core: float
    routing_adaptability_us: Optional[float] = None
    sent: Dict[str, int]
    delivered: Dict[str, int]


class RunResponse(BaseModel):
    name: str
    seed: int
    n_hosts: int
    report: KpiModel
    kpi_csv: str
    decision_log_csv: str
    trace_sha256: str
    trace: Optional[List[str]] = None


class SweepRequest(BaseModel):
    text: str
    sizes: List[int] = Field(min_length=1)


class SweepResponse(BaseModel):
    kpi_csv: str
    rows: List[KpiModel]


def _parse_or_400(text: str):
    try:
        return parse_scenario(text)
    except ParseError as exc:
        raise HTTPException(status_code=400, detail=[str(exc)])


def _kpi_model(report) -> KpiModel:
    return KpiModel(
        n_hosts=report.n_hosts,
        fallback_delay_us=report.fallback_delay_us,
        flow_install_us=report.flow_install_us,
        trust_transition_us=report.trust_transition_us,
        loss_primary=report.loss_primary,
        loss_fallback=report.loss_fallback,
        loss_core=report.loss_core,
        routing_adaptability_us=report.routing_adaptability_us,
        sent=report.sent,
        delivered=report.delivered,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="trustsdn", version=__version__)

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/scenario/validate", response_model=ValidateResponse)
    def validate(req: ValidateRequest):
        try:
            config = parse_scenario(req.text)
        except ParseError as exc:
            return ValidateResponse(valid=False, problems=[str(exc)])
        problems = validate_scenario(config)
        return ValidateResponse(valid=not problems, problems=problems,
                                name=config.name, n_hosts=config.n_hosts)

    @app.post("/scenario/run", response_model=RunResponse)
    def run_scenario(req: RunRequest):
        config = _parse_or_400(req.text)
        if req.seed is not None:
            config = dc_replace(config, seed=req.seed)
        try:
            result = runner.run(config)
        except (ValidationError, InvalidSpec) as exc:
            problems = getattr(exc, "problems", None) or [str(exc)]
            raise HTTPException(status_code=400, detail=problems)
        logger.info("run %s seed=%d trace=%s", config.name, config.seed,
                    result.trace_sha256[:12])
        return RunResponse(
            name=config.name,
            seed=config.seed,
            n_hosts=config.n_hosts,
            report=_kpi_model(result.report),
            kpi_csv=result.kpi_csv,
            decision_log_csv=result.decision_log,
            trace_sha256=result.trace_sha256,
            trace=result.trace.dump_lines() if req.include_trace else None,
        )

    @app.post("/scenario/sweep", response_model=SweepResponse)
    def sweep_scenario(req: SweepRequest):
        config = _parse_or_400(req.text)
        try:
            csv_text, results = runner.sweep(config, req.sizes)
        except (ValidationError, InvalidSpec) as exc:
            problems = getattr(exc, "problems", None) or [str(exc)]
            raise HTTPException(status_code=400, detail=problems)
        return SweepResponse(kpi_csv=csv_text,
                             rows=[_kpi_model(r.report) for r in results])

    return app


app = create_app()
