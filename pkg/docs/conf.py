# Sphinx configuration for the ctcdisc documentation.

import os
import sys
sys.path.insert(0, os.path.abspath('..'))

import ctcdisc   # pylint: disable=wrong-import-position

project = 'ctcdisc'
copyright = '2026, ctcdisc developers'   # pylint: disable=redefined-builtin
author = 'ctcdisc developers'
release = ctcdisc.__version__

extensions = [
    'sphinx.ext.autosectionlabel',
    'sphinx.ext.mathjax',
]
# section titles repeat across pages ("Types", "Examples")
autosectionlabel_prefix_document = False
suppress_warnings = ['autosectionlabel.*']

master_doc = 'index'
exclude_patterns = ['_build']

html_theme = 'nature'
html_theme_options = {
    'sidebarwidth': '320px',
    }
