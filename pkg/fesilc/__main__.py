"""Allow running fesilc as a module: python -m fesilc."""

from .cli import main

if __name__ == "__main__":
    main()
