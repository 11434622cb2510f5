"""sysopt: static whole-system performance optimization for microservice repositories."""

__version__ = "0.1.0"
