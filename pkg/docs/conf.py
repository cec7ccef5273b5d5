# metarec documentation build configuration file.
# flake8: noqa

import os
import sys

sys.path.insert(0, os.path.abspath('..'))

from metarec import __version__

# -- General configuration -----------------------------------------------------

extensions = ['sphinx.ext.autodoc', 'sphinx.ext.viewcode']

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = u'metarec'
copyright = u'2023, The metarec developers'

# The short X.Y version.
version = '.'.join(__version__.split('.')[:2])
# The full version, including alpha/beta/rc tags.
release = __version__

exclude_patterns = ['_build']
pygments_style = 'sphinx'

autodoc_member_order = 'bysource'

# -- Options for HTML output ---------------------------------------------------

html_theme = 'nature'
html_static_path = ['_static']
html_show_sourcelink = False
htmlhelp_basename = 'metarecdoc'

# -- Options for manual page output --------------------------------------------

man_pages = [
    ('commands', 'metarec', u'metarec command reference',
     [u'The metarec developers'], 1)
]
