#!/usr/bin/env python3
"""Regenerates the bundled fixture corpus (functions.jsonl, intents.jsonl).

Deterministic by construction: no RNG, output depends only on this file.
The functions file contains 200 documented module-level functions that
survive filtering, plus a handful of records that exercise the filters
(class methods, missing docstrings, an oversized function, malformed lines).
"""

import json
import os

VERBS = [
    ("read", "Read {noun} from disk and return it.",
     "    with open(path) as f:\n        return f.read()"),
    ("write", "Write the given {noun} to the target path.",
     "    with open(path, 'w') as f:\n        f.write(str(value))\n    return path"),
    ("parse", "Parse the raw {noun} into a structured value.",
     "    parts = text.strip().split(',')\n    return [p.strip() for p in parts if p]"),
    ("merge", "Merge two {noun} objects, preferring the second on conflict.",
     "    result = dict(first)\n    result.update(second)\n    return result"),
    ("sort", "Sort the {noun} entries in ascending order.",
     "    return sorted(items, key=lambda item: item[0])"),
    ("count", "Count how many {noun} entries satisfy the predicate.",
     "    total = 0\n    for item in items:\n        if predicate(item):\n            total += 1\n    return total"),
    ("find", "Find the first {noun} entry matching the query.",
     "    for item in items:\n        if query in str(item):\n            return item\n    return None"),
    ("filter", "Filter the {noun} entries, keeping matching ones.",
     "    return [item for item in items if keep(item)]"),
    ("convert", "Convert the {noun} into its serialized form.",
     "    return json.dumps(value, sort_keys=True)"),
    ("validate", "Validate the {noun} and raise on malformed input.",
     "    if value is None:\n        raise ValueError('missing value')\n    return True"),
]

NOUNS = [
    ("config file", "config_file", "path"),
    ("json document", "json_document", "text"),
    ("csv table", "csv_table", "rows"),
    ("user record", "user_record", "record"),
    ("log line", "log_line", "line"),
    ("url list", "url_list", "urls"),
    ("cache entry", "cache_entry", "entry"),
    ("token stream", "token_stream", "tokens"),
    ("matrix block", "matrix_block", "block"),
    ("queue item", "queue_item", "item"),
    ("date range", "date_range", "dates"),
    ("file path", "file_path", "path"),
    ("env variable", "env_variable", "name"),
    ("tag set", "tag_set", "tags"),
    ("index shard", "index_shard", "shard"),
    ("byte buffer", "byte_buffer", "buffer"),
    ("word vector", "word_vector", "vector"),
    ("tree node", "tree_node", "node"),
    ("graph edge", "graph_edge", "edge"),
    ("result page", "result_page", "page"),
]

ARG_BY_VERB = {
    "read": "path",
    "write": "path, value",
    "parse": "text",
    "merge": "first, second",
    "sort": "items",
    "count": "items, predicate",
    "find": "items, query",
    "filter": "items, keep",
    "convert": "value",
    "validate": "value",
}


def clean_functions():
    records = []
    for verb, doc_tpl, body in VERBS:
        for noun_words, noun_ident, _ in NOUNS:
            name = f"{verb}_{noun_ident}"
            docstring = doc_tpl.format(noun=noun_words)
            code = (
                f"def {name}({ARG_BY_VERB[verb]}):\n"
                f"    \"\"\"{docstring}\"\"\"\n"
                f"{body}\n"
            )
            records.append({
                "id": f"fix:{name}",
                "repo": "fixture/corpus",
                "path": f"pkg/{verb}.py",
                "name": name,
                "code": code,
                "docstring": docstring,
            })
    return records


def reject_records():
    rejects = []
    # class methods: indented defs and self receivers
    for i in range(4):
        rejects.append({
            "id": f"fix:method_{i}",
            "repo": "fixture/corpus",
            "path": "pkg/klass.py",
            "name": f"method_{i}",
            "code": (f"    def method_{i}(self):\n"
                     f"        \"\"\"Return stored field {i}.\"\"\"\n"
                     f"        return self._field_{i}\n"),
            "docstring": f"Return stored field {i}.",
        })
    for i in range(4):
        rejects.append({
            "id": f"fix:helper_{i}",
            "repo": "fixture/corpus",
            "path": "pkg/klass.py",
            "name": f"helper_{i}",
            "code": (f"def helper_{i}(self, x):\n"
                     f"    \"\"\"Scale x by field {i}.\"\"\"\n"
                     f"    return x * self._scale\n"),
            "docstring": f"Scale x by field {i}.",
        })
    # no docstring
    for i in range(5):
        rejects.append({
            "id": f"fix:bare_{i}",
            "repo": "fixture/corpus",
            "path": "pkg/bare.py",
            "name": f"bare_{i}",
            "code": f"def bare_{i}(x):\n    return x + {i}\n",
        })
    # oversized (> 150 filter tokens)
    for i in range(3):
        lines = "\n".join(f"    value_{j} = input_{j} + {j}" for j in range(40))
        rejects.append({
            "id": f"fix:huge_{i}",
            "repo": "fixture/corpus",
            "path": "pkg/huge.py",
            "name": f"huge_{i}",
            "code": (f"def huge_{i}(data):\n"
                     f"    \"\"\"Compute far too many intermediate values.\"\"\"\n"
                     f"{lines}\n    return value_39\n"),
            "docstring": "Compute far too many intermediate values.",
        })
    return rejects


def intents():
    """Some snippets echo fixture function bodies so alignment has signal."""
    mined = [
        (101, "how to read a file into a string", "with open(path) as f: return f.read()", 0.95),
        (102, "sort a list of tuples by first element", "sorted(items, key=lambda item: item[0])", 0.93),
        (103, "merge two dictionaries in python", "result = dict(first); result.update(second)", 0.91),
        (104, "serialize a dict to json with sorted keys", "json.dumps(value, sort_keys=True)", 0.89),
        (105, "filter a list with a predicate", "[item for item in items if keep(item)]", 0.87),
        (106, "count matching items in a list", "sum(1 for item in items if predicate(item))", 0.85),
        (107, "split a comma separated string", "[p.strip() for p in text.split(',')]", 0.83),
        (108, "find first element containing substring", "next(item for item in items if query in str(item))", 0.81),
        (109, "write a string to a file", "with open(path, 'w') as f: f.write(str(value))", 0.79),
        (110, "raise valueerror on missing value", "if value is None: raise ValueError('missing value')", 0.77),
        (111, "reverse a list in python", "items[::-1]", 0.75),
        (112, "get dictionary keys as a list", "list(d.keys())", 0.73),
        (113, "convert a list of ints to a single int", "sum(d * 10 ** i for i, d in enumerate(x[::-1]))", 0.71),
        (114, "flatten a nested list", "[x for sub in nested for x in sub]", 0.69),
        (115, "check if a file exists", "os.path.exists(path)", 0.67),
        (116, "strip whitespace from every line", "[line.strip() for line in lines]", 0.65),
        (117, "read json from a file", "json.load(open(path))", 0.63),
        (118, "join a list of strings with commas", "','.join(strings)", 0.61),
        (119, "get the maximum of a dictionary by value", "max(d.items(), key=lambda kv: kv[1])", 0.59),
        (120, "zip two lists into a dict", "dict(zip(keys, values))", 0.57),
        (121, "enumerate with index in a loop", "for i, item in enumerate(items): use(i, item)", 0.55),
        (122, "remove duplicates preserving order", "list(dict.fromkeys(items))", 0.53),
        (123, "format a float to two decimals", "'{:.2f}'.format(value)", 0.51),
        (124, "catch and ignore an exception", "try: run()\nexcept Exception: pass", 0.49),
        (125, "sum the values of a dictionary", "sum(d.values())", 0.47),
        (126, "sort dictionary by value descending", "sorted(d.items(), key=lambda kv: -kv[1])", 0.45),
        (127, "check if a string is a number", "text.isdigit()", 0.43),
        (128, "read lines of a file into a list", "open(path).readlines()", 0.41),
        (129, "append to a file without overwriting", "open(path, 'a').write(line)", 0.39),
        (130, "make a directory if it does not exist", "os.makedirs(path, exist_ok=True)", 0.37),
        (131, "get the last element of a list", "items[-1]", 0.35),
        (132, "slice the first n elements", "items[:n]", 0.33),
        (133, "convert string to lowercase", "text.lower()", 0.31),
        (134, "iterate over dictionary items", "for key, value in d.items(): use(key, value)", 0.29),
        (135, "swap keys and values of a dict", "{v: k for k, v in d.items()}", 0.27),
        (136, "repeat a string n times", "text * n", 0.25),
        (137, "round a number to the nearest integer", "int(round(value))", 0.23),
        (138, "concatenate two lists", "first + second", 0.21),
        (139, "check if a key is in a dictionary", "key in d", 0.19),
        (140, "get current working directory", "os.getcwd()", 0.17),
    ]
    curated = [
        (201, "averaging the values in a dictionary based on the key",
         "[(i, sum(j) / len(j)) for i, j in list(d.items())]"),
        (202, "how to convert a list of multiple integers into a single integer",
         "sum(d * 10 ** i for i, d in enumerate(x[::-1]))"),
        (203, "sort a list of tuples by the second element",
         "sorted(items, key=lambda item: item[1])"),
        (204, "validate that a value is not none",
         "if value is None: raise ValueError('missing value')"),
        (205, "merge two dicts preferring the second",
         "result = dict(first)\nresult.update(second)\nreturn result"),
        (206, "dump json with sorted keys",
         "json.dumps(value, sort_keys=True)"),
        (207, "count items satisfying a condition",
         "total = 0\nfor item in items:\n    if predicate(item):\n        total += 1"),
        (208, "read a whole file",
         "with open(path) as f:\n    return f.read()"),
    ]
    records = []
    for qid, intent, snippet, prob in mined:
        records.append({"question_id": qid, "intent": intent, "snippet": snippet,
                        "prob": prob})
    for qid, intent, snippet in curated:
        records.append({"question_id": qid, "intent": intent, "snippet": snippet,
                        "curated": True})
    return records


def main():
    here = os.path.dirname(os.path.abspath(__file__))
    records = clean_functions() + reject_records()
    lines = [json.dumps(r, sort_keys=True) for r in records]
    # two malformed lines exercise the skip tally
    lines.insert(37, "{this line is not json")
    lines.append("[1, 2, 3]")
    with open(os.path.join(here, "functions.jsonl"), "w") as f:
        f.write("\n".join(lines) + "\n")
    with open(os.path.join(here, "intents.jsonl"), "w") as f:
        for r in intents():
            f.write(json.dumps(r, sort_keys=True) + "\n")
    print(f"wrote {len(records)} function records ({len(clean_functions())} clean) "
          f"and {len(intents())} intents")


if __name__ == "__main__":
    main()
