"""Laws shipped with the package."""

from importlib import resources

from ..law import Law, parse_law

BUILTIN = ("be", "open")


def law_text(name: str) -> str:
    if name not in BUILTIN:
        raise KeyError(f"no builtin law {name!r}; choose from {', '.join(BUILTIN)}")
    return resources.files(__name__).joinpath(f"{name}.law").read_text(encoding="utf-8")


def builtin_law(name: str = "be") -> Law:
    return parse_law(law_text(name))
