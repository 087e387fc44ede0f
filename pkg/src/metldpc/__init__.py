"""Design and threshold analysis of multi-edge-type LDPC code ensembles.

The package covers the full design loop: ensemble algebra and validation
(:mod:`metldpc.ensemble`), deterministic concentrated check construction
(:mod:`metldpc.check_design`), decoding thresholds by density evolution on
the erasure and Gaussian channels (:mod:`metldpc.density_evolution`),
coefficient optimization by adaptive-range search
(:mod:`metldpc.optimizer_ar`), structure search by differential evolution
(:mod:`metldpc.optimizer_struct`), cost-surface scans
(:mod:`metldpc.landscape`), and a CLI (:mod:`metldpc.cli`).
"""

__version__ = "0.1.0"
