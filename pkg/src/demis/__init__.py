"""Selective ChaCha20 video encryption, ciphertext tampering simulation and
DEMIS threat-model evaluation."""

__version__ = "0.1.0"
