"""
hlmax Package
Hardy-Littlewood averaging, maximal and integral-functions on metric measure spaces
"""
__version__ = "1.0.0"
