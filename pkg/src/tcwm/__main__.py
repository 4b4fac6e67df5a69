"""Allow running tcwm as a module: python -m tcwm"""

from .cli.main import app

if __name__ == "__main__":
    app()
