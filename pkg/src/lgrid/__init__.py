"""Desk-scale grid portal: proxy-certificate delegation, job gateway, CLI."""

__version__ = "0.1.0"
