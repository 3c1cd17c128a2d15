"""Dialog records, vocabularies, batches and experiment results."""
