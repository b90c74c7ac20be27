#!/usr/bin/env python3
"""
Health check for the grasp simulator.
Validates that dependencies import, the settings are usable and a default
scene can be built and settled.
"""

import sys


def print_status(message: str, success: bool) -> bool:
    """Print status with indicator."""
    status = "✓" if success else "✗"
    color = "\033[92m" if success else "\033[91m"
    reset = "\033[0m"
    print(f"  {color}{status}{reset} {message}")
    return success


def _check_imports(title: str, packages: list[tuple[str, str]]) -> bool:
    print(f"\n{title}")
    all_ok = True
    for module, name in packages:
        try:
            __import__(module)
            print_status(name, True)
        except ImportError as e:
            all_ok = print_status(f"{name}: {e}", False) and all_ok
    return all_ok


def check_numeric_packages() -> bool:
    return _check_imports("🧮 Numeric Packages:", [
        ("numpy", "NumPy"),
        ("scipy.optimize", "SciPy"),
        ("pandas", "pandas"),
        ("matplotlib", "Matplotlib"),
    ])


def check_service_packages() -> bool:
    return _check_imports("📦 Service Packages:", [
        ("pydantic", "Pydantic"),
        ("dotenv", "python-dotenv"),
        ("typer", "Typer"),
        ("mcp.server", "MCP SDK"),
        ("uvicorn", "Uvicorn"),
        ("starlette", "Starlette"),
    ])


def check_simulator() -> bool:
    """Build the default scene with a pot in front of the chest and settle it."""
    print("\n🤖 Simulator:")
    try:
        from wholebody_grasp.contact import ContactMode, Manipuland
        from wholebody_grasp.controller import GraspPolicyConfig
        from wholebody_grasp.engine import build_scene
        from wholebody_grasp.kinematics import ArmParams, BodyFrame, ChestGeometry
        from wholebody_grasp.tactile import ChamberSet

        scene = build_scene(BodyFrame(), ArmParams(), ChestGeometry(), ChamberSet(), ContactMode.SOFT,
                            GraspPolicyConfig().pregrasp_q,
                            manipuland=Manipuland.circle(0.1, (0.0, 0.45), mass=1.0))
        print_status("default scene builds", True)
        clear = print_status("arms clear of each other and the chest", not scene.collision(0.005))
        reading = scene.pressures(scene.resolve())
        print_status(f"pre-grasp pressures {reading.stacked().round(2).tolist()} hPa", True)
        return clear
    except Exception as e:
        return print_status(f"simulator error: {e}", False)


def check_config() -> bool:
    print("\n⚙️  Configuration:")
    try:
        from wholebody_grasp.config import RuntimeSettings
        from wholebody_grasp.experiments import builtin_experiments

        problems = RuntimeSettings.from_env().validate()
        for problem in problems:
            print_status(problem, False)
        if not problems:
            print_status("runtime settings valid", True)
        print_status(f"{len(builtin_experiments())} builtin experiments", True)
        return not problems
    except Exception as e:
        return print_status(f"config error: {e}", False)


def main() -> int:
    """Run health checks."""
    print("=" * 50)
    print("🤲 Whole-body grasp simulator - Health Check")
    print("=" * 50)

    results = [
        check_numeric_packages(),
        check_service_packages(),
        check_config(),
        check_simulator(),
    ]

    print("\n" + "=" * 50)
    if all(results):
        print("✅ All checks passed!")
        print("\nTo run a builtin experiment:")
        print("  wholebody-grasp run pots-soft-vs-hard --out results/pots")
        print("\nTo serve the MCP tools over HTTP:")
        print("  python -m wholebody_grasp.local_mcp_server")
        return 0
    print("❌ Some checks failed")
    return 1


if __name__ == "__main__":
    sys.exit(main())
