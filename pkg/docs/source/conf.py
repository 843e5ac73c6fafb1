# Sphinx configuration for the sktune API reference.
# Options: https://www.sphinx-doc.org/en/master/usage/configuration.html

import os
import sys

# Document the package from the repository checkout
sys.path.insert(0, os.path.abspath("../.."))

project = "sktune"
copyright = "2026, Armin Ariamajd"
author = "Armin Ariamajd"
release = "0.1.0"

# numpy-style docstrings only
extensions = ["sphinx.ext.autodoc", "sphinx.ext.napoleon"]
napoleon_google_docstring = False
napoleon_numpy_docstring = True
autodoc_member_order = "bysource"

templates_path = ["_templates"]
exclude_patterns = []

html_theme = "sphinx_rtd_theme"
html_static_path = ["_static"]
