"""
mapl-choice: simulação de painéis de escolha discreta e estimação de modelos
MNL, logit misto, redes neurais e MAPL.
"""

__version__ = "1.0.0"
