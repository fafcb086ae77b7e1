"""Mean-uncertainty classifiers for high-frequency futures direction prediction."""
