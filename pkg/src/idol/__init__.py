"""Differential testing harness for the Solidity compiler.

The harness rewrites contracts with reverse-optimization (de-optimizing)
transformations, compiles every variant under several optimizer
configurations, executes the results deterministically on an in-process EVM,
and reports behavioral divergences between configurations as candidate
compiler bugs.
"""

__version__ = "0.1.0"
