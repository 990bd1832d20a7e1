"""
CRUD operations for the history tables.
"""

from typing import Any, Dict, List, Optional

from sqlalchemy.orm import Session

from sbgp.database import FitRecord, TrainingRun


class FitRecordService:
    """CRUD operations for fit records."""

    @staticmethod
    def create(session: Session, family: str, params: Dict[str, Any], source: str = None,
               site: str = None, threshold_level: float = None, n: int = None,
               weights_path: str = None) -> FitRecord:
        """Store a fitted parameter object."""
        record = FitRecord(
            family=family,
            params=params,
            source=source,
            site=site,
            threshold_level=threshold_level,
            n=n,
            weights_path=weights_path
        )
        session.add(record)
        session.commit()
        session.refresh(record)
        return record

    @staticmethod
    def get_by_id(session: Session, record_id: int) -> Optional[FitRecord]:
        """Get fit record by ID."""
        return session.query(FitRecord).filter_by(id=record_id).first()

    @staticmethod
    def get_history(session: Session, limit: int = 50, family: Optional[str] = None) -> List[FitRecord]:
        """Most recent fits first."""
        query = session.query(FitRecord)
        if family:
            query = query.filter_by(family=family)
        return query.order_by(FitRecord.id.desc()).limit(limit).all()


class TrainingRunService:
    """CRUD operations for training runs."""

    @staticmethod
    def create(session: Session, family: str, steps: int, loss_lambda: float,
               best_validation_risk: float = None, weights_path: str = None,
               config: Dict[str, Any] = None) -> TrainingRun:
        """Store a training run summary."""
        run = TrainingRun(
            family=family,
            steps=steps,
            loss_lambda=loss_lambda,
            best_validation_risk=best_validation_risk,
            weights_path=weights_path,
            config=config or {}
        )
        session.add(run)
        session.commit()
        session.refresh(run)
        return run

    @staticmethod
    def get_by_id(session: Session, run_id: int) -> Optional[TrainingRun]:
        """Get training run by ID."""
        return session.query(TrainingRun).filter_by(id=run_id).first()

    @staticmethod
    def get_history(session: Session, limit: int = 50, family: Optional[str] = None) -> List[TrainingRun]:
        """Most recent runs first."""
        query = session.query(TrainingRun)
        if family:
            query = query.filter_by(family=family)
        return query.order_by(TrainingRun.id.desc()).limit(limit).all()


def fit_record_to_dict(record: FitRecord) -> Dict[str, Any]:
    """Flat dict of a fit record, parameters expanded into columns."""
    out = {
        "id": record.id,
        "family": record.family,
        "source": record.source or "",
        "site": record.site or "",
        "threshold_level": record.threshold_level,
        "n": record.n,
        "created_at": record.created_at.isoformat() if record.created_at else "",
    }
    theta = (record.params or {}).get("theta", {})
    out.update(theta)
    return out
