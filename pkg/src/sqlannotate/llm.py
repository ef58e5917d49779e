"""Provider-agnostic LLM access: prompt templates and a scripted mock.

Templates are reconstructions: each one states context, objective, and a
fenced structured-output block so responses can be parsed mechanically.
The ScriptedMock makes every provider-backed path deterministic in tests.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Callable, Protocol

PROMPT_BUDGET = 16_000

DEFAULT_GENERATION_TEMPERATURE = 0.7
DEFAULT_JUDGING_TEMPERATURE = 0.0


class ProviderError(RuntimeError):
    pass


class MissingSlotError(KeyError):
    pass


class EmptyResponseError(ProviderError):
    pass


class MockScriptError(ProviderError):
    pass


class Provider(Protocol):
    name: str

    def invoke(self, prompt: str, temperature: float = 0.0) -> str: ...


# ---------------------------------------------------------------------------
# Templates

@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str

    def slots(self) -> set[str]:
        return set(re.findall(r"\{(\w+)\}", self.body))


TEMPLATES: dict[str, PromptTemplate] = {
    t.name: t
    for t in [
        PromptTemplate(
            "question_generation",
            "### Task: question_generation\n"
            "You translate SQL queries into natural-language questions.\n"
            "Database schema:\n{schema}\n"
            "{examples}"
            "Write one concise, natural question that asks exactly what the SQL "
            "query below computes. Do not mention SQL keywords or table syntax.\n"
            "SQL query:\n{sql}\n"
            "Step-by-step meaning:\n{steps}\n"
            "Respond with the question text only, on a single line.\n",
        ),
        PromptTemplate(
            "explanation_fallback",
            "### Task: explanation_fallback\n"
            "You explain SQL queries step by step, one step per clause or "
            "condition, in the order FROM, JOINs, WHERE conditions, GROUP BY, "
            "ORDER BY, SELECT.\n"
            "Database schema:\n{schema}\n"
            "Worked examples:\n{examples}\n"
            "SQL query:\n{sql}\n"
            "Respond with a fenced json block:\n"
            "```json\n"
            '{{"steps": [{{"kind": "FROM", "text": "...", "sub_question": "..."}}]}}\n'
            "```\n",
        ),
        PromptTemplate(
            "sub_question",
            "### Task: sub_question\n"
            "Write the short question a person would ask that is answered by "
            "this single step of a SQL query.\n"
            "Database schema:\n{schema}\n"
            "SQL query:\n{sql}\n"
            "Step:\n{step}\n"
            "Respond with the sub-question only, on a single line.\n",
        ),
        PromptTemplate(
            "alignment_analysis",
            "### Task: alignment_analysis\n"
            "Analyze how well a natural-language question matches a SQL query, "
            "using the query's step-by-step explanation as the bridge. Discuss, "
            "for each step, which part of the question (if any) expresses it, "
            "and note any question content with no corresponding step.\n"
            "Database schema:\n{schema}\n"
            "SQL query:\n{sql}\n"
            "Steps:\n{steps}\n"
            "Question:\n{question}\n"
            "Respond with free-form analysis.\n",
        ),
        PromptTemplate(
            "alignment_mapping",
            "### Task: alignment_mapping\n"
            "Map each explanation step to the exact substrings of the question "
            "that express it. Quote substrings verbatim from the question. A "
            "step with no matching substring gets no entry.\n"
            "SQL query:\n{sql}\n"
            "Steps:\n{steps}\n"
            "Question:\n{question}\n"
            "Prior analysis:\n{analysis}\n"
            "Respond with a fenced json block:\n"
            "```json\n"
            '{{"mappings": [{{"step": 1, "quote": "...", "start": 0}}]}}\n'
            "```\n"
            "The start offset is optional; the quote is authoritative.\n",
        ),
        PromptTemplate(
            "inject",
            "### Task: inject\n"
            "Revise the question so it also expresses the missing step, keeping "
            "everything else intact and fluent.\n"
            "Database schema:\n{schema}\n"
            "SQL query:\n{sql}\n"
            "Current question:\n{question}\n"
            "Missing step:\n{step}\n"
            "Respond with the revised question only, on a single line.\n",
        ),
        PromptTemplate(
            "equivalence",
            "### Task: equivalence\n"
            "Judge whether the natural-language question and the SQL query ask "
            "for the same thing. Write a short report, then a line of the form "
            "'Score: N' where N is an integer 0-100 (100 = fully equivalent).\n"
            "Database schema:\n{schema}\n"
            "SQL query:\n{sql}\n"
            "Question:\n{question}\n",
        ),
    ]
}


def render_prompt(template: PromptTemplate, slots: dict[str, str]) -> str:
    """Deterministic template instantiation; every referenced slot required."""
    needed = template.slots()
    missing = needed - set(slots)
    if missing:
        raise MissingSlotError(f"missing slots for {template.name}: {sorted(missing)}")
    return template.body.format(**{k: slots[k] for k in needed})


def examples_block(examples: list[tuple[str, str]], budget: int) -> str:
    """Few-shot block in ranked order, truncated from the tail to fit budget."""
    kept = list(examples)
    while kept:
        lines = ["Examples:"]
        for sql, question in kept:
            lines.append(f"SQL: {sql}\nQuestion: {question}")
        block = "\n".join(lines) + "\n"
        if len(block) <= budget:
            return block
        kept.pop()
    return ""


# ---------------------------------------------------------------------------
# Providers

@dataclass
class MockRule:
    match: str | Callable[[str], bool]
    response: str | Callable[[str], str] | list[str]

    def matches(self, prompt: str) -> bool:
        if callable(self.match):
            return self.match(prompt)
        return self.match in prompt


class ScriptedMock:
    """Deterministic provider: ordered rules, first match wins.

    List responses are consumed one call at a time; running past the end
    or failing to match any rule raises, never silently defaults.
    """

    name = "scripted-mock"

    def __init__(self, rules: list[MockRule]):
        self.rules = rules
        self.calls: list[str] = []
        self._cursors: dict[int, int] = {}

    def invoke(self, prompt: str, temperature: float = 0.0) -> str:
        self.calls.append(prompt)
        for idx, rule in enumerate(self.rules):
            if not rule.matches(prompt):
                continue
            if callable(rule.response):
                return rule.response(prompt)
            if isinstance(rule.response, list):
                cursor = self._cursors.get(idx, 0)
                if cursor >= len(rule.response):
                    raise MockScriptError(
                        f"mock rule {idx} exhausted after {cursor} responses"
                    )
                self._cursors[idx] = cursor + 1
                return rule.response[cursor]
            return rule.response
        head = prompt.splitlines()[0] if prompt else ""
        raise MockScriptError(f"no mock rule matches prompt starting {head!r}")


def mock_from_script(document: str) -> ScriptedMock:
    """Load a ScriptedMock from a JSON script: {"rules":[{"match":..,"response"|"responses":..}]}."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise MockScriptError(f"malformed mock script: {exc}") from exc
    rules = []
    for raw in doc.get("rules", []):
        response = raw["responses"] if "responses" in raw else raw["response"]
        rules.append(MockRule(match=raw.get("match", ""), response=response))
    return ScriptedMock(rules)


class HttpProvider:
    """Minimal OpenAI-compatible chat-completions client."""

    def __init__(self, config: dict):
        import os

        self.name = config.get("provider", "openai")
        self.model = config["model"]
        self.base_url = config.get("base_url", "https://api.openai.com/v1").rstrip("/")
        key_env = config.get("api_key_env", "OPENAI_API_KEY")
        self.api_key = os.environ.get(key_env, "")
        if not self.api_key:
            raise ProviderError(f"environment variable {key_env} is not set")
        self.timeout = float(config.get("timeout_seconds", 60))
        self._semaphore = threading.Semaphore(int(config.get("max_in_flight", 4)))

    def invoke(self, prompt: str, temperature: float = 0.0) -> str:
        import requests

        with self._semaphore:
            try:
                resp = requests.post(
                    f"{self.base_url}/chat/completions",
                    headers={"Authorization": f"Bearer {self.api_key}"},
                    json={
                        "model": self.model,
                        "temperature": temperature,
                        "messages": [{"role": "user", "content": prompt}],
                    },
                    timeout=self.timeout,
                )
                resp.raise_for_status()
                return resp.json()["choices"][0]["message"]["content"]
            except Exception as exc:
                raise ProviderError(f"provider request failed: {exc}") from exc


def provider_from_config(config: dict, script: str | None = None) -> Provider:
    kind = config.get("provider", "mock")
    if kind == "mock":
        if script is not None:
            return mock_from_script(script)
        return compliant_mock()
    return HttpProvider(config)


def compliant_mock(score: int = 95) -> ScriptedMock:
    """A mock that plays along with every pipeline stage.

    Questions are derived deterministically from the SQL; alignment maps
    every step to the whole question; equivalence always scores `score`.
    """

    def question_of(prompt: str) -> str:
        m = re.search(r"SQL query:\n(.+)", prompt)
        sql = m.group(1).strip() if m else "this query"
        return f"Which rows does the query `{sql}` ask for?"

    def mapping_of(prompt: str) -> str:
        q = re.search(r"Question:\n(.+)", prompt)
        question = q.group(1).strip() if q else ""
        steps = re.findall(r"^(\d+)\.", prompt, flags=re.MULTILINE)
        mappings = [
            {"step": int(s), "quote": question, "start": 0} for s in steps
        ]
        return "```json\n" + json.dumps({"mappings": mappings}) + "\n```"

    return ScriptedMock(
        [
            MockRule("### Task: question_generation", question_of),
            MockRule("### Task: alignment_analysis", "Each step is expressed by the question."),
            MockRule("### Task: alignment_mapping", mapping_of),
            MockRule("### Task: inject", lambda p: re.search(r"Current question:\n(.+)", p).group(1).strip()),
            MockRule("### Task: equivalence", f"The question matches the query.\nScore: {score}"),
            MockRule("### Task: explanation_fallback", '```json\n{"steps": []}\n```'),
            MockRule("### Task: sub_question", "What does this step ask?"),
        ]
    )


# ---------------------------------------------------------------------------
# Operations

def generate_question(
    sql_text: str,
    schema_text: str,
    steps_text: str,
    examples: list[tuple[str, str]],
    provider: Provider,
    temperature: float = DEFAULT_GENERATION_TEMPERATURE,
) -> str:
    """Single provider call; returns the trimmed question text."""
    template = TEMPLATES["question_generation"]
    fixed = render_prompt(
        template,
        {"schema": schema_text, "sql": sql_text, "steps": steps_text, "examples": ""},
    )
    block = examples_block(examples, max(0, PROMPT_BUDGET - len(fixed)))
    prompt = render_prompt(
        template,
        {"schema": schema_text, "sql": sql_text, "steps": steps_text, "examples": block},
    )
    response = provider.invoke(prompt, temperature=temperature).strip()
    if not response:
        raise EmptyResponseError("provider returned an empty question")
    return response


_SCORE_RE = re.compile(r"(?im)^\s*score\s*[:=]?\s*(\d{1,3})\b")
_ANY_INT_RE = re.compile(r"\b(\d{1,3})\b")


def parse_score(response: str) -> int | None:
    m = _SCORE_RE.search(response)
    if m is None:
        candidates = [int(x) for x in _ANY_INT_RE.findall(response) if 0 <= int(x) <= 100]
        if len(candidates) != 1:
            return None
        return candidates[0]
    value = int(m.group(1))
    return value if 0 <= value <= 100 else None


def score_equivalence(
    sql_text: str,
    question: str,
    schema_text: str,
    provider: Provider,
    rounds: int = 3,
    temperature: float = DEFAULT_JUDGING_TEMPERATURE,
) -> tuple[str, int]:
    """Average an integer 0-100 judgment over `rounds` calls (half-up)."""
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    prompt = render_prompt(
        TEMPLATES["equivalence"],
        {"schema": schema_text, "sql": sql_text, "question": question},
    )
    scores: list[int] = []
    report = ""
    for _ in range(rounds):
        response = provider.invoke(prompt, temperature=temperature)
        score = parse_score(response)
        if score is None:
            response = provider.invoke(
                prompt + "\nRespond again; the 'Score: N' line is required.\n",
                temperature=temperature,
            )
            score = parse_score(response)
            if score is None:
                raise ProviderError("unparseable equivalence score after reprompt")
        scores.append(score)
        report = response
    mean = Decimal(sum(scores)) / Decimal(len(scores))
    final = int(mean.quantize(Decimal(1), rounding=ROUND_HALF_UP))
    return report, final


def extract_fenced_json(response: str) -> dict:
    """Parse the first fenced json block, or the whole response as JSON."""
    m = re.search(r"```(?:json)?\s*\n(.*?)```", response, flags=re.DOTALL)
    payload = m.group(1) if m else response
    try:
        return json.loads(payload)
    except json.JSONDecodeError as exc:
        raise ProviderError(f"response is not valid structured JSON: {exc}") from exc
