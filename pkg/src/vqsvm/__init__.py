"""Least-squares SVM training with a variational quantum linear solver.

Modules: ``simulator`` (statevector circuits), ``pauli`` (word
decomposition), ``kernel`` (data and LS-SVM systems), ``svd`` (diagonal
recasting), ``vqls`` (ansatz, Hadamard-test cost, solve loop),
``optimizer`` (derivative-free minimizers), ``classifier`` (SVC construction
and metrics) and ``experiments``/``cli`` (harness).
"""

__version__ = "0.1.0"
