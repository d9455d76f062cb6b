"""Access to the bundled reference controllers and prompt fixtures."""

from __future__ import annotations

from importlib import resources

REFERENCE_CONTROLLERS = ("gold", "naive", "eager", "acc_gold")


def controller_source(name: str) -> str:
    """Source text of a bundled reference controller (gold, naive, eager, acc_gold)."""
    if name not in REFERENCE_CONTROLLERS:
        raise KeyError(f"unknown reference controller {name!r}")
    return resources.files("simloop.controllers").joinpath(f"{name}.py").read_text()


def prompt_text(name: str) -> str:
    """One of the bundled prompt fixtures: context, caem_task, acc_task."""
    return resources.files("simloop.prompts").joinpath(f"{name}.txt").read_text()


def load_controller_function(source: str):
    """Execute candidate source and return its entry-point callable."""
    namespace: dict = {"__name__": "candidate"}
    exec(compile(source, "<candidate>", "exec"), namespace)
    fn = namespace.get("controller")
    if not callable(fn):
        raise ValueError("source defines no callable 'controller'")
    return fn
