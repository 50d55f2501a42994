"""Testes unitários."""
