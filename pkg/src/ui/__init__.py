"""
Módulo UI - Linha de comando e escrita de relatórios
"""

__version__ = '1.0.0'
