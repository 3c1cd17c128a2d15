"""uqrank: uncertainty-aware answer ranking for visual dialog.

This package trains visual dialog models whose encoders are Bayesian through Monte-Carlo
dropout, rewrites their attention with the gradient of the aleatoric uncertainty loss,
decodes diverse answers from a variational latent, and reports retrieval metrics,
per-round uncertainty and SVD diversity.

Quick start:

.. code-block:: bash

   pip install uqrank                      # Install the package
   uqrank gen --out data/shapes.json       # Generate a synthetic dataset
   uqrank train --config run.cfg           # Train, evaluate and write a report
   uqrank ablate --mode losses             # Run one ablation sweep
"""
