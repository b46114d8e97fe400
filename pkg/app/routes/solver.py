import asyncio
import json
import logging
import re
import time
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional

import aiofiles
import numpy as np
from fastapi import APIRouter, File, Form, HTTPException, Response, UploadFile, status
from pydantic import BaseModel, Field, ValidationError, model_validator

from app.config import PRISM_REPORT_DIR, PRISM_THREADS
from app.errors import USAGE_ERRORS, PrismError
from app.models.experiment import FunctionName, SpectrumSpec
from app.models.report import IterationRecord
from app.models.strategy import CoefficientStrategy, IterationOptions, PrismExactStrategy
from app.services import experiment_service, genmat
from app.utils.matrix_io import encode_matrix, parse_matrix_bytes
from app.websocket.manager import manager

logger = logging.getLogger(__name__)

router = APIRouter()

# Pool de calcul partagé par les requêtes de résolution
_executor = ThreadPoolExecutor(max_workers=PRISM_THREADS)


class SolveRequest(BaseModel):
    function: FunctionName
    matrix: Optional[List[List[float]]] = None
    spec: Optional[SpectrumSpec] = None
    strategy: CoefficientStrategy = Field(default_factory=PrismExactStrategy)
    options: IterationOptions = Field(default_factory=IterationOptions)
    p: int = Field(default=2, ge=1)
    save_report: bool = False

    @model_validator(mode="after")
    def one_input(self):
        if (self.matrix is None) == (self.spec is None):
            raise ValueError("give exactly one of matrix or spec")
        return self


def _http_error(e: Exception) -> HTTPException:
    """Erreurs d'usage (format, forme, symétrie, configuration) → 400, échecs numériques → 422"""
    if isinstance(e, USAGE_ERRORS + (ValueError, ValidationError)):
        return HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(e))
    return HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(e))


def _input_matrix(body: SolveRequest) -> np.ndarray:
    if body.spec is not None:
        return genmat.generate(body.spec)
    a = np.asarray(body.matrix, dtype=np.float64)
    if a.ndim != 2 or a.size == 0:
        raise ValueError("matrix must be a non-empty list of equal-length rows")
    return a


async def _save_report(body: SolveRequest, report: dict) -> str:
    PRISM_REPORT_DIR.mkdir(parents=True, exist_ok=True)
    strategy = re.sub(r"[^A-Za-z0-9_.-]+", "_", body.strategy.label)
    file_path = PRISM_REPORT_DIR / f"{body.function.value}-{strategy}-{time.time_ns()}.json"
    async with aiofiles.open(file_path, "w", encoding="utf-8") as f:
        await f.write(json.dumps(report, ensure_ascii=False, indent=2))
    logger.info(f"Saved report to {file_path}")
    return str(file_path)


@router.post("/solve")
async def solve(body: SolveRequest):
    """Résout f(A) avec la stratégie demandée ; la progression est diffusée sur /ws/progress"""
    loop = asyncio.get_running_loop()
    label = body.strategy.label

    def on_record(record: IterationRecord) -> None:
        message = {"function": body.function.value, "strategy": label, **record.model_dump()}
        manager.broadcast_threadsafe(loop, message)

    def work():
        a = _input_matrix(body)
        return experiment_service.solve(body.function, a, body.strategy, body.options, body.p, on_record)

    try:
        result, target = await loop.run_in_executor(_executor, work)
    except (PrismError, ValueError, ValidationError) as e:
        logger.warning(f"Solve {body.function.value} [{label}] rejected: {e}")
        raise _http_error(e)

    report = {
        "request": body.model_dump(mode="json", exclude={"matrix"}),
        "versions": experiment_service.versions(),
        "report": result.report.model_dump(mode="json"),
    }
    response = {
        "converged": result.converged,
        "iterations": result.report.iterations,
        "report": report["report"],
        "result": target.tolist(),
    }
    if body.save_report:
        response["report_file"] = await _save_report(body, report)
    return response


@router.post("/oracle")
async def oracle(file: UploadFile = File(...), function: FunctionName = Form(...), p: int = Form(2)):
    """Valeur de référence de f(A) pour une matrice MTXB (ou texte) téléversée"""
    content = await file.read()
    loop = asyncio.get_running_loop()
    try:
        a = parse_matrix_bytes(content)
        reference = await loop.run_in_executor(_executor, experiment_service.oracle, function, a, p)
    except (PrismError, ValueError) as e:
        raise _http_error(e)
    return Response(content=encode_matrix(reference), media_type="application/octet-stream")
