"""Pipeline stages from raw dialogs to trained models and evaluation results.

Each stage is a :class:`~uqrank.globals.process_stage.ProcessStage` that reports
recoverable issues into a shared problems collection.
"""
