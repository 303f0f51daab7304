"""
Experiment driver: run specifications, artifacts, the runner and the benchmark harness
"""
