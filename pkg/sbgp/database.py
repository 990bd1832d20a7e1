"""
Database models for the fit and training history.
Uses SQLAlchemy ORM with SQLite by default.
"""

import os
from datetime import datetime
from typing import Optional

from sqlalchemy import JSON, Column, DateTime, Float, Integer, String, create_engine
from sqlalchemy.orm import declarative_base, sessionmaker

Base = declarative_base()

DEFAULT_DB_URL = "sqlite:///sbgp_history.db"


class FitRecord(Base):
    """One fitted parameter vector and where its data came from."""
    __tablename__ = 'fit_records'

    id = Column(Integer, primary_key=True)
    family = Column(String(20), nullable=False)  # sbgp or bgp
    source = Column(String(500))  # data file
    site = Column(String(200))  # site label for pairwise fits
    threshold_level = Column(Float)
    n = Column(Integer)
    weights_path = Column(String(500))
    params = Column(JSON, nullable=False)

    created_at = Column(DateTime, default=datetime.utcnow)

    def __repr__(self):
        return f"<FitRecord(id={self.id}, family='{self.family}', source='{self.source}')>"


class TrainingRun(Base):
    """A completed training run."""
    __tablename__ = 'training_runs'

    id = Column(Integer, primary_key=True)
    family = Column(String(20), nullable=False)
    steps = Column(Integer, default=0)
    loss_lambda = Column(Float, default=0.0)
    best_validation_risk = Column(Float)
    weights_path = Column(String(500))
    config = Column(JSON)

    created_at = Column(DateTime, default=datetime.utcnow)

    def __repr__(self):
        return f"<TrainingRun(id={self.id}, family='{self.family}', steps={self.steps})>"


# Database connection and session management
class Database:
    """Database connection manager."""

    def __init__(self, db_url: str = DEFAULT_DB_URL):
        """
        Initialize database connection.

        Args:
            db_url: SQLAlchemy database URL
        """
        self.db_url = db_url
        self.engine = create_engine(db_url, echo=False)
        self.SessionLocal = sessionmaker(bind=self.engine)

    def create_tables(self):
        """Create all tables if they don't exist."""
        Base.metadata.create_all(self.engine)

    def get_session(self):
        """Get a new database session."""
        return self.SessionLocal()

    def drop_tables(self):
        """Drop all tables (use with caution!)."""
        Base.metadata.drop_all(self.engine)


# Singleton instance
_db_instance: Optional[Database] = None


def get_database(db_url: Optional[str] = None) -> Database:
    """
    Get or create the database singleton.

    A different db_url than the current singleton's replaces it.

    Args:
        db_url: SQLAlchemy database URL (default: SBGP_DB_URL environment variable)

    Returns:
        Database instance
    """
    global _db_instance
    db_url = db_url or os.getenv("SBGP_DB_URL", DEFAULT_DB_URL)
    if _db_instance is None or _db_instance.db_url != db_url:
        _db_instance = Database(db_url)
        _db_instance.create_tables()
    return _db_instance
