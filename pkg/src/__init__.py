"""SOMF: online and subsampled online matrix factorization for dictionary learning."""
