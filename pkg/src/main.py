"""
Главный файл приложения

Entry point of the KAM engine command line.
"""
from src.runner.cli import main

if __name__ == '__main__':
    raise SystemExit(main())
