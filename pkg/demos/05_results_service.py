"""End-to-end results pipeline without a browser: run trials headless,
post the records over the HTTP API, then pull CSV and grouped stats back
out — the same surfaces the web client uses.
"""
import tempfile
from dataclasses import asdict
from pathlib import Path

from fastapi.testclient import TestClient

from swarmsim import (RecordStore, TaskKind, TaskMode, TrialConfig,
                      create_app, run_batch)
from swarmsim.observe import ObservationMode

configs = [
    TrialConfig(TaskKind.VARY_VISUALIZATION,
                TaskMode(TaskKind.VARY_VISUALIZATION, obs), seed=seed,
                max_steps=4000, controller_id="scripted_push",
                participant_id=f"demo-{seed}")
    for obs in (ObservationMode.FULL_STATE, ObservationMode.MEAN)
    for seed in range(4)
]
records = run_batch(configs, parallelism=4)

with tempfile.TemporaryDirectory() as tmp:
    store = RecordStore(Path(tmp) / "records.jsonl")
    app = create_app(store)
    with TestClient(app) as client:
        token = client.post("/token").json()["token"]
        print(f"participant token: {token}")
        for rec in records:
            resp = client.post("/results", json=asdict(rec))
            print(f"stored id={resp.json()['id']} "
                  f"{rec.mode_detail.split(';', 1)[0]} steps={rec.steps}")
        print("\n--- results.csv ---")
        print(client.get("/results.csv").text)
        print("--- stats grouped by mode ---")
        for row in client.get("/stats", params={
                "experiment": "vary_visualization", "group_by": "mode"}).json()["rows"]:
            print(row)
    store.close()
