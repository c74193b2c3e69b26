"""Record live API responses as test fixtures.

Regenerate with:  python3 scripts/capture_fixtures.py
Requires the morphcf package (and its test extra) to be installed.
"""
import json
import time
from pathlib import Path

from fastapi.testclient import TestClient

from morphcf import synth
from morphcf.dataio import Dataset
from morphcf.service import create_app

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
DATASET_SEED = 5
DATASET_SIZE = 24


def wait_complete(client, run_id):
    while True:
        doc = client.get(f"/api/runs/{run_id}").json()
        if doc["status"] in ("complete", "failed"):
            assert doc["status"] == "complete", doc
            return doc
        time.sleep(0.05)


def main(tmp="/tmp/fixture_ds"):
    import shutil

    shutil.rmtree(tmp, ignore_errors=True)
    synth.generate_dataset(DATASET_SIZE, DATASET_SEED, tmp)
    ds = Dataset.load(tmp)
    ones = [r.id for r in ds.records if r.predicted_label == 1]
    zeros = [r.id for r in ds.records if r.predicted_label == 0]

    FIXTURES.mkdir(parents=True, exist_ok=True)
    out = {}
    with TestClient(create_app(tmp)) as client:
        out["schema"] = client.get("/api/schema").json()
        out["subjects"] = client.get("/api/subjects").json()
        out["histogram_age"] = client.get("/api/histogram/age?bins=10").json()
        out["histogram_sex"] = client.get("/api/histogram/sex").json()
        out["filters_age"] = client.post(
            "/api/filters", json={"clauses": [{"variable": "age", "lo": 50, "hi": 75}]}
        ).json()
        out["filters_age_sex"] = client.post(
            "/api/filters",
            json={"clauses": [{"variable": "age", "lo": 50, "hi": 75},
                              {"variable": "sex", "values": ["female"]}]},
        ).json()
        out["filters_empty"] = client.post(
            "/api/filters", json={"clauses": [{"variable": "age", "lo": 200, "hi": 300}]}
        ).json()

        body = {"targets": ones[:4], "sources": zeros[:4], "selections": [[3]]}
        accepted = client.post("/api/runs", json=body).json()
        run_id = accepted["run_id"]
        out["run_accepted"] = accepted
        out["run_request"] = body
        out["run_complete"] = wait_complete(client, run_id)
        out["run_summary"] = client.get(f"/api/runs/{run_id}/summary").json()
        out["run_results"] = client.get(f"/api/runs/{run_id}/results?offset=0&limit=50").json()

        body2 = {"targets": ones[:4], "sources": zeros[:4],
                 "selections": [[1], [2], [3], [1, 2], [1, 3], [2, 3], [1, 2, 3]]}
        accepted2 = client.post("/api/runs", json=body2).json()
        out["run_all_request"] = body2
        out["run_all_accepted"] = accepted2
        out["run_all_complete"] = wait_complete(client, accepted2["run_id"])
        out["run_all_summary"] = client.get(
            f"/api/runs/{accepted2['run_id']}/summary").json()

    for name, doc in out.items():
        (FIXTURES / f"{name}.json").write_text(json.dumps(doc, indent=2) + "\n")
    print(f"wrote {len(out)} fixtures to {FIXTURES}")


if __name__ == "__main__":
    main()
