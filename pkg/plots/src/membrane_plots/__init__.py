"""Figure renderers for the membrane-lab CSV/JSON outputs.

File-to-file batch renders only: no display server, no physics recomputation,
deterministic images for fixed inputs.
"""

__version__ = "0.1.0"
