"""biasforge: bias-controlled synthetic data generation, mixing, mitigation,
and group-sliced evaluation for LLM fine-tuning experiments."""

__version__ = "0.1.0"
