"""Runs the CLI on a small configuration and validates every JSON artifact
against the shipped schemas.

usage: schema_check.py CLI SCHEMA_DIR CONFIG WORK_DIR
"""

import json
import pathlib
import shutil
import subprocess
import sys

try:
    import jsonschema
except ImportError:  # pragma: no cover
    print("jsonschema is not installed; skipping")
    sys.exit(0)


def run(cli, *args):
    subprocess.run([cli, *args], check=True, stdout=subprocess.DEVNULL)


def main():
    cli, schema_dir, config, work = sys.argv[1:5]
    schema_dir = pathlib.Path(schema_dir)
    work = pathlib.Path(work)
    shutil.rmtree(work, ignore_errors=True)
    common = ["--config", config, "--out", str(work)]

    run(cli, "gen", *common)
    for model in ("m5", "rf"):
        run(cli, "train", *common, "--model", model)
        for gen in ("rs", "ga", "kd"):
            run(cli, "explain", *common, "--model", model, "--generator", gen)
    run(cli, "eval", *common)

    checks = [(p, "model") for p in sorted(work.glob("model-*.json"))]
    for d in sorted((work / "explain").iterdir()):
        checks.append((d / "counterfactuals.json", "counterfactuals"))
        checks.append((d / "assertions.json", "assertions"))
    checks.append((work / "eval" / "tables.json", "tables"))

    failed = 0
    for path, name in checks:
        schema = json.loads((schema_dir / f"{name}.schema.json").read_text())
        validator = jsonschema.Draft202012Validator(schema)
        errors = list(validator.iter_errors(json.loads(path.read_text())))
        status = "ok" if not errors else f"{len(errors)} error(s): {errors[0].message}"
        print(f"{path.relative_to(work)} against {name}: {status}")
        failed += bool(errors)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
