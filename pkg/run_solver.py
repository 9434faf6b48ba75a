from src.cli.run_solver import main


if __name__ == "__main__":
    raise SystemExit(main())
