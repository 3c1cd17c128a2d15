"""Training: the dialog model, its cost, the optimizer and the ablation runners."""
