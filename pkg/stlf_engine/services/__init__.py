"""Service layer: CSV ingestion, checkpoint files, forecast walks and evaluation reports."""
