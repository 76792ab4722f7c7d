"""County-level disaster resilience index: ingest, score, classify, compare, export."""

__version__ = "0.1.0"
