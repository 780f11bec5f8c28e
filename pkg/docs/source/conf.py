# rcbound documentation build configuration file.
#
# This file is execfile()d with the current directory set to its containing dir.
import os
import sys

import toml

autodoc_mock_imports = [
    "numpy",
    "numpy.typing",
    "scipy",
    "scipy.optimize",
    "scipy.special",
    "scipy.spatial",
    "scipy.stats",
    "pandas",
    "tables",
    "tqdm",
]

# the package is documented from the repository root
sys.path.insert(0, os.path.abspath("../.."))

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.intersphinx",
    "sphinx.ext.mathjax",
    "sphinx.ext.napoleon",
    "sphinx.ext.viewcode",
    "myst_parser",
]

autodoc_default_options = {
    "members": True,
    "undoc-members": True,
    "show-inheritance": True,
}

templates_path = ["_templates"]
source_suffix = [".rst", ".md"]
master_doc = "index"

project = "rcbound"
author = "rcbound developers"
copyright = f"2026, {author}"

with open("./../../pyproject.toml", encoding="utf-8") as f:
    toml_file = toml.load(f)
    version = toml_file["project"]["version"]
release = version

language = "en"
exclude_patterns = ["_build", "Thumbs.db", ".DS_Store"]
pygments_style = "sphinx"
todo_include_todos = False

html_theme = "sphinx_rtd_theme"
html_static_path = ["_static"]
htmlhelp_basename = "rcbound"

intersphinx_mapping = {
    "python": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable/", None),
    "scipy": ("https://docs.scipy.org/doc/scipy/", None),
    "pandas": ("https://pandas.pydata.org/docs/", None),
}

autoclass_content = "init"
autodoc_member_order = "bysource"
