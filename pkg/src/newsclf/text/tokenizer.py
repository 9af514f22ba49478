from __future__ import annotations

import re

# maximal runs of letters/digits; "_" counts as a separator
_TOKEN_RE = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Lowercase *text* and split it on every run of non-alphanumeric characters.

    >>> tokenize("COVID-19 cases up 3%")
    ['covid', '19', 'cases', 'up', '3']
    """
    return _TOKEN_RE.findall(text.lower())
