"""Model components built on the tensor engine.

Bayesian (dropout) layers, the image/text encoders with attention fusion, the variational
answer decoder and the uncertainty heads, losses and attention rewrite.
"""
