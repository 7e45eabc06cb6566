"""
Seeded template programs with reference summaries

Used as the desk-scale corpus for the training stages and for demos.
"""
from dataclasses import dataclass

import numpy as np

from extract.types import SourceUnit

NOUNS = ("items", "values", "prices", "scores", "counts", "rows", "data", "weights", "sizes", "totals")
VERBS = ("compute", "get", "find", "build", "collect", "check", "apply", "scan", "make", "load")
LOCALS = ("acc", "result", "best", "current", "index", "total", "temp", "found", "out", "step")

TEMPLATES = (
    (
        "def {verb}_sum({a}):\n"
        "    {t} = 0\n"
        "    for {x} in {a}:\n"
        "        {t} += {x}\n"
        "    return {t}\n",
        "Return the sum of all elements in {a}.",
    ),
    (
        "def {verb}_max({a}, {b}):\n"
        "    if {a} > {b}:\n"
        "        {t} = {a}\n"
        "    else:\n"
        "        {t} = {b}\n"
        "    return {t}\n",
        "Return the larger of {a} and {b}.",
    ),
    (
        "def {verb}_clamp({a}, {lo}, {hi}):\n"
        "    if {a} < {lo}:\n"
        "        return {lo}\n"
        "    elif {a} > {hi}:\n"
        "        return {hi}\n"
        "    else:\n"
        "        return {a}\n",
        "Clamp {a} into the range from {lo} to {hi}.",
    ),
    (
        "def {verb}_countdown({a}):\n"
        "    {t} = 0\n"
        "    while {a} > 0:\n"
        "        if {a} == {k}:\n"
        "            break\n"
        "        {a} = {a} - 1\n"
        "        {t} += 1\n"
        "    return {t}\n",
        "Count down from {a} and stop early at {k}.",
    ),
    (
        "def {verb}_parse({a}):\n"
        "    try:\n"
        "        {t} = int({a})\n"
        "    except ValueError:\n"
        "        {t} = {k}\n"
        "    return {t}\n",
        "Parse {a} as an integer, falling back to {k}.",
    ),
    (
        "def {verb}_positive({a}):\n"
        "    {t} = 0\n"
        "    for {x} in {a}:\n"
        "        if {x} <= 0:\n"
        "            continue\n"
        "        {t} += 1\n"
        "    return {t}\n",
        "Count the positive elements of {a}.",
    ),
    (
        "def {verb}_index({a}, {b}):\n"
        "    {t} = -1\n"
        "    for {x} in range(len({a})):\n"
        "        if {a}[{x}] == {b}:\n"
        "            {t} = {x}\n"
        "            break\n"
        "    return {t}\n",
        "Return the first index of {b} in {a}, or -1.",
    ),
    (
        "def {verb}_scaled({a}, {b}):\n"
        "    {t} = []\n"
        "    for {x} in {a}:\n"
        "        {t}.append({x} * {b} + {k})\n"
        "    return {t}\n",
        "Scale every element of {a} by {b} and add {k}.",
    ),
    (
        "def {verb}_abs({a}):\n"
        "    if {a} < 0:\n"
        "        {a} = -{a}\n"
        "    return {a}\n",
        "Return the absolute value of {a}.",
    ),
    (
        "def {verb}_safe_div({a}, {b}):\n"
        "    try:\n"
        "        {t} = {a} / {b}\n"
        "    except ZeroDivisionError:\n"
        "        {t} = 0\n"
        "    finally:\n"
        "        {x} = {k}\n"
        "    return {t}\n",
        "Divide {a} by {b}, returning zero on division by zero.",
    ),
)


@dataclass(frozen=True)
class SyntheticProgram:
    unit: SourceUnit
    summary: str
    template: int


def generate_program(index: int, rng: np.random.Generator, template=None) -> SyntheticProgram:
    template = int(rng.integers(len(TEMPLATES))) if template is None else template
    nouns = rng.choice(len(NOUNS), size=3, replace=False)
    local_names = rng.choice(len(LOCALS), size=2, replace=False)
    names = {
        "verb": VERBS[int(rng.integers(len(VERBS)))],
        "a": NOUNS[nouns[0]],
        "b": NOUNS[nouns[1]],
        "lo": "low",
        "hi": "high",
        "t": LOCALS[local_names[0]],
        "x": LOCALS[local_names[1]],
        "k": str(int(rng.integers(2, 100))),
    }
    code_template, summary_template = TEMPLATES[template]
    unit = SourceUnit(id=f"synthetic/{index:05d}.py", language="python", code=code_template.format(**names))
    return SyntheticProgram(unit=unit, summary=summary_template.format(**names), template=template)


def generate_corpus(count: int, seed: int, distinct_templates: bool = False) -> list:
    """`count` programs; with distinct_templates the template cycles so neighbours differ"""
    rng = np.random.default_rng(seed)
    return [
        generate_program(i, rng, template=(i % len(TEMPLATES)) if distinct_templates else None)
        for i in range(count)
    ]
