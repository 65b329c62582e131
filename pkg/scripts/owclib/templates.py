from dataclasses import dataclass
from typing import Dict, List, Optional

from .text import STOPWORDS, STOPWORDS_VERSION

TEMPLATES_VERSION = "1"
DEFAULT_PROMPT = "What type of object is in this image?"

# Domain nouns replacing "object" in the domain-specific variant
DOMAIN_NOUNS: Dict[str, str] = {
    "DTD": "texture",
    "FGVC": "aircraft",
    "FLWR": "flower",
    "FOOD": "food",
    "PETS": "pet",
    "CARS": "car",
}


@dataclass(frozen=True)
class PromptTemplate:
    """
    A named, versioned query that predictions were generated with. Predictions carry its variant_id,
    so delta reports name the prompts they compare.
    """

    variant_id: str
    version: str
    text: str
    description: str

    def render(self, dataset_id: Optional[str] = None) -> str:
        noun = DOMAIN_NOUNS.get(dataset_id or "", "object")
        return self.text.format(noun=noun)


TEMPLATES: Dict[str, PromptTemplate] = {
    template.variant_id: template
    for template in [
        PromptTemplate("base", TEMPLATES_VERSION, DEFAULT_PROMPT, "default open-world query"),
        PromptTemplate("generic", TEMPLATES_VERSION, f"{DEFAULT_PROMPT} Be generic.", "asks for coarser answers"),
        PromptTemplate("specific", TEMPLATES_VERSION, f"{DEFAULT_PROMPT} Be specific.", "asks for finer answers"),
        PromptTemplate(
            "domain",
            TEMPLATES_VERSION,
            "What type of {noun} is in this image?",
            "names the domain of fine-grained datasets: " + ", ".join(f"{k}={v}" for k, v in DOMAIN_NOUNS.items()),
        ),
        PromptTemplate("cot", TEMPLATES_VERSION, f"{DEFAULT_PROMPT} Think step by step.", "zero-shot chain of thought"),
        PromptTemplate("list", TEMPLATES_VERSION, "List the objects in the image.", "multi-label: object list"),
        PromptTemplate("caption", TEMPLATES_VERSION, "Caption the image.", "multi-label: caption"),
        PromptTemplate("describe", TEMPLATES_VERSION, "Describe the content of the image.", "multi-label: description"),
    ]
}


def get_template(variant_id: str) -> PromptTemplate:
    try:
        return TEMPLATES[variant_id]
    except KeyError:
        raise KeyError(f"Unknown prompt variant {variant_id!r}, known: {', '.join(TEMPLATES)}") from None


def render_catalogue() -> str:
    lines: List[str] = []
    for template in TEMPLATES.values():
        lines.append(f"{template.variant_id} (v{template.version}): {template.description}")
        lines.append(f"  {template.render()}")
        if template.variant_id == "domain":
            for dataset_id in DOMAIN_NOUNS:
                lines.append(f"  {dataset_id}: {template.render(dataset_id)}")
    return "\n".join(lines) + "\n"


def render_stopwords() -> str:
    return f"# stopwords v{STOPWORDS_VERSION}\n" + "\n".join(STOPWORDS) + "\n"
