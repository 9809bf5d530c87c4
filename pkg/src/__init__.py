"""
qgnls - edge-localized states of the cubic NLS equation on metric graphs
"""

__version__ = '0.1.0'
