"""Regenerate tests/golden/<fixture>/ from the current emitter.

Run after an intentional output change, then review the diff:

    python3 scripts/update_goldens.py && git diff tests/golden
"""

from pathlib import Path

from famass.deploy import deploy
from famass.emit import deployment_files, write_files
from famass.fml import parse_file
from famass.simrt import SimConfig, init

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "tests" / "fixtures"
GOLDEN = ROOT / "tests" / "golden"
DEPLOYABLE = ("demo", "network")


def main():
    for name in DEPLOYABLE:
        files = deployment_files(deploy(parse_file(FIXTURES / f"{name}.fml")), name)
        out = GOLDEN / name
        if out.exists():
            for old in out.iterdir():
                old.unlink()
        write_files(out, files)
        print(f"{out.relative_to(ROOT)}: {len(files)} files")
    oam = deploy(parse_file(FIXTURES / "demo.fml")).oam
    state = GOLDEN / "demo.state0.seed42.json"
    state.write_text(init(oam, SimConfig(horizon=20, seed=42)).dump(), encoding="utf-8")
    print(state.relative_to(ROOT))


if __name__ == "__main__":
    main()
