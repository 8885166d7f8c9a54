"""Validates recorded API responses against schema/api.schema.json."""
import json
import sys

try:
    import jsonschema
except ImportError:
    print("jsonschema not installed")
    sys.exit(77)

schema_path, samples_path = sys.argv[1], sys.argv[2]
with open(schema_path) as f:
    schema = json.load(f)
jsonschema.Draft7Validator.check_schema(schema)

bad = 0
seen = set()
with open(samples_path) as f:
    for n, line in enumerate(f, 1):
        sample = json.loads(line)
        route, status = sample["route"], sample["status"]
        if status >= 400:
            name = "error"
        else:
            name = schema["endpoints"][route][str(status)]
        seen.add(name)
        sub = dict(schema, **{"$ref": "#/definitions/" + name})
        errors = list(jsonschema.Draft7Validator(sub).iter_errors(sample["body"]))
        if errors:
            bad += 1
            print(f"line {n} {route} {status}: {errors[0].message}")

missing = {"dataset", "presets", "selection", "selections", "bins", "rank", "error"} - seen
if missing:
    print("no samples for", sorted(missing))
    bad += 1
print(f"{n} responses checked, {bad} invalid")
sys.exit(1 if bad else 0)
