"""Testes de integração."""
