"""Rule programs shipped with the package."""
from __future__ import annotations

from importlib import resources

from ..logic.parser import parse_program

SEARCH_TASKS = {"deep": ("task_deep.pl", "a", "h"), "shallow": ("task_shallow.pl", "a", "e")}


def program_text(name: str) -> str:
    if not name.endswith(".pl"):
        name += ".pl"
    return resources.files(__package__).joinpath(name).read_text()


def load_builtin_program(*names: str):
    """Parse the concatenation of the named program files."""
    return parse_program("\n".join(program_text(n) for n in names))


def search_program(task: str, with_rules: bool = True):
    """Declarations, edges and start facts for a graph search task."""
    fname, start, goal = SEARCH_TASKS[task]
    seeds = f"dfs(k({start},nil),{start},{goal}).\nbfs(k({start},nil),{start},{goal}).\n"
    parts = [program_text("search_decls"), program_text(fname), seeds]
    if with_rules:
        parts.append(program_text("search_rules"))
    return parse_program("\n".join(parts))
