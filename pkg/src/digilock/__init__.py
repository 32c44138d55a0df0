"""digilock: a dual-key digital locker.

A locker opens only when the user's secret and the provider's master key
both participate, and the user confirms a recovered secret phrase before
consenting. The package provides the cryptographic suite, the wire format,
the three actor state machines, a persistent registry and document vault,
a deterministic adversarial simulation harness, and a CLI.
"""

__version__ = "0.1.0"
