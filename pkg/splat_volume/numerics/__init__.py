"""
Dense tensors, reverse-mode differentiation, layers and the optimizer.
"""
