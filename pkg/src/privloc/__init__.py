"""Privacy-preserving ToA localization simulator.

Multi-entity simulation of a localization protocol in which anchors and
a target jointly estimate the target's position without revealing anchor
coordinates, timestamps, or the resulting estimate to each other or to
the aggregating third party.  Built from Paillier homomorphic
encryption, zero-sum noise masking, and GDOP-contribution anchor
selection, with bit-exact communication accounting and plaintext oracles
for end-to-end verification.
"""

from privloc.backend import BACKEND_NAME

__all__ = ["BACKEND_NAME"]
__version__ = "0.1.0"
