"""
Analisador de Fluxos em Redes de Jackson
Ponto de entrada da aplicação

Uso:
    python src/main.py analyze --config configs/feedback.json
    python src/main.py simulate --config configs/feedback.json --seed 7
    python src/main.py compare --config configs/feedback.json --self-check
"""

import sys
import logging
from pathlib import Path

# Adicionar a raiz do repositório ao path para imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.ui.cli import EXIT_CONFIG, build_parser, dispatch


def setup_logging(level: str = "INFO"):
    """Configura sistema de logging da aplicação (arquivo + stderr)."""
    log_dir = Path(__file__).parent.parent / 'logs'
    log_dir.mkdir(exist_ok=True)

    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(log_dir / 'app.log', encoding='utf-8'),
            logging.StreamHandler(sys.stderr)
        ]
    )
    return logging.getLogger(__name__)


def main(argv=None):
    """Função principal da aplicação."""
    parser = build_parser()
    args = parser.parse_args(argv)

    logger = setup_logging(args.log_level)
    logger.info(f"Iniciando comando '{args.command}'")

    try:
        return dispatch(args)
    except KeyboardInterrupt:
        logger.info("Execução interrompida pelo usuário")
        print("\n👋 Encerrando...")
        return 1
    except OSError as e:
        logger.error(f"Erro de E/S: {e}")
        print(f"❌ Erro de E/S: {e}")
        return EXIT_CONFIG
    except Exception as e:
        logger.exception("Erro fatal na aplicação")
        print(f"❌ Erro: {str(e)}")
        return 1
    finally:
        logger.info("Execução encerrada")


if __name__ == "__main__":
    sys.exit(main())
