"""Task-level robust execution of learned dynamical-system motion plans."""
