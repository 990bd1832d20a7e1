"""
Quick smoke check of the main components: history database, data ingestion,
model sampling and a tiny estimator round trip.
"""

import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from sbgp.data_source_manager import exceedance_set, load_csv, weekly_maxima
from sbgp.database import get_database
from sbgp.models.dependence import chi_curve
from sbgp.models.distributions import make_rng
from sbgp.models.sbgp_model import reference_params, sample
from sbgp.nbe.family import create_family
from sbgp.nbe.network import fit_json
from sbgp.nbe.prior import PriorConfig
from sbgp.nbe.trainer import TrainConfig, train

DATA = Path(__file__).parent / "sbgp" / "data"


def test_database():
    """Test database initialization."""
    print("\n" + "=" * 60)
    print("Testing Database...")
    print("=" * 60)

    try:
        with tempfile.TemporaryDirectory() as tmp:
            db = get_database(f"sqlite:///{tmp}/smoke.db")
            session = db.get_session()
            print(f"✓ Database initialized at {db.db_url}")
            session.close()
            db.engine.dispose()
        return True
    except Exception as e:
        print(f"✗ Database test failed: {e}")
        return False


def test_ingestion():
    """Test the bundled rainfall file end to end."""
    print("\n" + "=" * 60)
    print("Testing Data Ingestion...")
    print("=" * 60)

    try:
        series = load_csv(DATA / "rainfall_daily.csv", "date", ["a", "b"])
        print(f"✓ Loaded {len(series)} daily rows")
        weekly = weekly_maxima(series)
        print(f"✓ {len(weekly)} weekly maxima")
        es = exceedance_set(weekly, 0.7)
        print(f"✓ {es.rows.shape[0]} exceedances above thresholds {es.thresholds}")
        return True
    except Exception as e:
        print(f"✗ Ingestion test failed: {e}")
        return False


def test_model():
    """Test sampling and chi(q) at the first reference configuration."""
    print("\n" + "=" * 60)
    print("Testing sBGP Model...")
    print("=" * 60)

    try:
        data = sample(reference_params(1), 10_000, make_rng(1))
        curve = chi_curve(data, [0.5, 0.9])
        print(f"✓ chi(0.5) = {curve.values[0]:.3f}, chi(0.9) = {curve.values[1]:.3f}")
        return True
    except Exception as e:
        print(f"✗ Model test failed: {e}")
        return False


def test_estimator():
    """Test a few training steps and one fit."""
    print("\n" + "=" * 60)
    print("Testing Neural Estimator...")
    print("=" * 60)

    try:
        family = create_family("sbgp", PriorConfig(n_range=(100, 120)))
        cfg = TrainConfig(num_steps=2, batch_size=2, validation_size=2, eval_every=1)
        wts = train(family, cfg, make_rng(2), progress=False).weights
        print("✓ Trained for 2 steps")
        fitted = fit_json(wts, sample(reference_params(2), 200, make_rng(3)))
        print(f"✓ Fitted eta = {fitted['eta']:.3f}")
        return True
    except Exception as e:
        print(f"✗ Estimator test failed: {e}")
        return False


def main():
    """Run all checks."""
    print("\n" + "=" * 60)
    print("🧪 sBGP Toolkit - Component Checks")
    print("=" * 60)

    results = {
        "Database": test_database(),
        "Data Ingestion": test_ingestion(),
        "sBGP Model": test_model(),
        "Neural Estimator": test_estimator(),
    }

    print("\n" + "=" * 60)
    print("Results Summary")
    print("=" * 60)

    for name, passed in results.items():
        status = "✓ PASS" if passed else "✗ FAIL"
        print(f"{status}: {name}")

    all_passed = all(results.values())

    print("\n" + "=" * 60)
    if all_passed:
        print("✅ All checks passed!")
        print("\nRun the full suite with: pytest")
    else:
        print("❌ Some checks failed. Please check the errors above.")
    print("=" * 60 + "\n")

    return 0 if all_passed else 1


if __name__ == "__main__":
    sys.exit(main())
