"""Fixtures e factories para testes."""
