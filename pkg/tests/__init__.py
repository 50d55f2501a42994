"""
Test suite do mapl-choice.

Estrutura:
- unit/: Testes unitários (isolados, rápidos)
- integration/: CLI e verificações de aceitação (as lentas sob `slow`)
- fixtures/: Factories para especificações de teste
"""
