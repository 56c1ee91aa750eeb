"""
Módulo Core - Modelo da rede, cadeias de rota, simulação e aproximação NB
"""

__version__ = '1.0.0'
__author__ = 'Equipe Fluxos Jackson'
