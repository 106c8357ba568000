# Sphinx configuration for the ADI-GLM documentation.
import os
import re
import sys

sys.path.insert(0, os.path.abspath(".."))


def _package_version():
    with open(os.path.join("..", "adiglm", "__init__.py")) as f:
        match = re.search(r"^__version__ = ['\"]([^'\"]*)['\"]", f.read(), re.M)
    return match.group(1) if match else "unknown"


project = "ADI-GLM"
copyright = "2026, ADI-GLM developers"
author = "ADI-GLM developers"
release = _package_version()

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.coverage",
    "sphinx.ext.mathjax",
    "sphinx.ext.napoleon",
    "sphinx_rtd_theme",
    "sphinx.ext.viewcode",
]
napoleon_numpy_docstring = True
autodoc_member_order = "bysource"

templates_path = ["_templates"]
exclude_patterns = ["_build", "Thumbs.db", ".DS_Store"]

html_theme = "sphinx_rtd_theme"
html_static_path = ["_static"]
