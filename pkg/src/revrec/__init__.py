"""Code-reviewer recommendation toolkit.

Event-log corpus handling, point-in-time feature extraction, learn-to-rank
training and scoring, workload-aware reranking, bystander assignment
policies, backtest evaluation, a review-process simulator, and a
counter-backed serving path with a latency benchmark.
"""

__version__ = "0.1.0"
