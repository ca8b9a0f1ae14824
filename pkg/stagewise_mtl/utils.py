from typing import Callable, List, Optional, TypeVar

from docstring_parser import parse as parse_docstring

T = TypeVar('T')


def get_description_from_function(func: Callable) -> str:
    description = ''
    if func.__doc__:
        docstring = parse_docstring(func.__doc__)
        description = f'{docstring.short_description}\n\n{docstring.long_description or ""}'
    return description.strip()


def parse_list(value: Optional[str], cast: Callable[[str], T]) -> Optional[List[T]]:
    """'1, 2,3' -> [cast('1'), cast('2'), cast('3')]; None stays None."""
    if value is None:
        return None
    items = [item.strip() for item in value.split(',') if item.strip()]
    if not items:
        raise ValueError('expected a comma separated list with at least one item')
    return [cast(item) for item in items]
