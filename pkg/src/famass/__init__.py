"""Analysis-model compiler and multi-agent supply chain simulation runtime."""
