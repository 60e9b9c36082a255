#!/usr/bin/env python3
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Validate shipped configs and generated results against the schemas."""

import argparse
import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema
from referencing import Registry, Resource

# CLI overrides that keep every run short
QUICK = {
    "simulate": ["--paths", "200", "--steps", "20"],
    "certify": ["--paths", "200", "--steps", "20"],
    "ldp-tail": ["--paths", "300", "--steps", "20"],
    "mckean-sweep": ["--paths", "200", "--steps", "20"],
    "pafit": ["--n-grid", "100,300,1000,3000"],
    "pagen": [],
    "rates": [],
    "chaos-sweep": [],
    "ldp-lambda": [],
}


def load_schemas(root):
    schemas = {}
    resources = []
    for p in sorted((root / "schemas").glob("*.schema.json")):
        doc = json.loads(p.read_text())
        jsonschema.Draft202012Validator.check_schema(doc)
        schemas[p.name.split(".")[0]] = doc
        resources.append((doc["$id"], Resource.from_contents(doc)))
    registry = Registry().with_resources(resources)
    return {k: jsonschema.Draft202012Validator(v, registry=registry) for k, v in schemas.items()}


def check(validator, doc, what, failures):
    errs = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    for e in errs[:5]:
        path = "/".join(str(x) for x in e.absolute_path)
        failures.append(f"{what}: {path}: {e.message[:200]}")
    return not errs


def run(cli, kind, args, out):
    cmd = [str(cli), kind, *args, "--out", str(out)]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode not in (0, 3):
        raise RuntimeError(f"{' '.join(cmd)} exited {proc.returncode}: {proc.stderr.strip()}")
    return json.loads((out / "result.json").read_text())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cli", required=True)
    ap.add_argument("--root", required=True)
    opts = ap.parse_args()
    root = pathlib.Path(opts.root)
    v = load_schemas(root)
    failures = []
    seen = set()

    for p in sorted((root / "configs" / "models").glob("*.json")):
        check(v["model"], json.loads(p.read_text()), p.name, failures)

    with tempfile.TemporaryDirectory() as tmp:
        tmp = pathlib.Path(tmp)
        for p in sorted((root / "configs").glob("*.json")):
            spec = json.loads(p.read_text())
            check(v["experiment"], spec, p.name, failures)
            kind = spec["kind"]
            res = run(opts.cli, kind, ["--config", str(p), *QUICK[kind]], tmp / p.stem)
            if check(v["result"], res, f"result of {p.name}", failures):
                seen.add(kind)
            for side in (tmp / p.stem).glob("*.columns.json"):
                cols = json.loads(side.read_text())
                header = (side.parent / side.name.replace(".columns.json", ".csv")).read_text().splitlines()[0]
                if header.split(",") != [c["name"] for c in cols["columns"]]:
                    failures.append(f"{side.name}: columns do not match the CSV header")

        # fits from saved histories take the other source branch
        hist = []
        for s in range(10):
            d = tmp / f"hist{s}"
            run(opts.cli, "pagen", ["--config", str(root / "configs" / "pagen.json"), "--seed", str(s)], d)
            hist.append(str(d / "history.csv"))
        spec = {"format": "pmfnet.experiment/1", "kind": "pafit", "histories": hist, "N_grid": [500, 1000, 2000, 5000]}
        (tmp / "fit.json").write_text(json.dumps(spec))
        check(v["experiment"], spec, "histories spec", failures)
        res = run(opts.cli, "pafit", ["--config", str(tmp / "fit.json")], tmp / "fit")
        check(v["result"], res, "result of histories fit", failures)

    bad = {"kind": "simulate", "model": {"n": 0, "m": 1}}
    if v["experiment"].is_valid(bad):
        failures.append("schema accepted a model with n = 0")
    bad = {"format": "pmfnet.result/1", "kind": "certify", "payload": {"verdict": "MAYBE"}}
    if v["result"].is_valid(bad):
        failures.append("schema accepted a malformed result")

    missing = set(QUICK) - seen
    if missing:
        failures.append(f"no validated result for: {', '.join(sorted(missing))}")
    for f in failures:
        print("FAIL", f)
    print(f"{len(seen)} kinds validated, {len(failures)} failures")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
