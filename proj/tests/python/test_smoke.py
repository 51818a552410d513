import math
import os
import subprocess

import pytest

import molbuild


def test_smiles_round_trip():
    m = molbuild.parse_smiles("OCC")
    assert len(m) == 3
    assert m.atoms.count(2) == 1
    again = molbuild.parse_smiles(molbuild.write_smiles(m))
    assert molbuild.isomorphic(m, again)
    assert m.canonical_key() == molbuild.parse_smiles("CCO").canonical_key()


def test_aromatic_input_with_full_alphabet():
    benzene = molbuild.parse_smiles("c1ccccc1", "drug-full")
    orders = sorted(sum(row) for row in benzene.bonds)
    assert orders == [3] * 6


def test_errors_carry_a_kind():
    with pytest.raises(molbuild.MolbuildError) as info:
        molbuild.parse_smiles("C((")
    assert info.value.kind == "SyntaxError"
    with pytest.raises(molbuild.MolbuildError) as info:
        molbuild.parse_smiles("CS")
    assert info.value.kind == "UnsupportedAtom"


def test_action_trace_and_masks():
    assert molbuild.action_trace("C=O") == ["AddAtom(2,0,2)", "DontChange"]
    mask = molbuild.level0_mask("C")
    assert mask == [True, True, True, True, False]
    capped = molbuild.level0_mask("C", {"max_atoms": 1})
    assert capped == [True, False, False, False, False]


def test_enumerate_counts():
    assert molbuild.enumerate(2, {"symbols": ["C"]}) == ["C", "C#C", "C=C", "CC"]
    assert len(molbuild.enumerate(4)) == 571


def test_score_objectives():
    values = molbuild.score({"type": "isomer", "formula": "C4H10"}, ["CCCC", "C"])
    assert values[0] == 1.0
    assert values[1] == pytest.approx(0.1)
    assert molbuild.score({"type": "substructure", "smiles": "CC"}, ["CCC"]) == [2.0]


def test_solvent_combinators():
    assert molbuild.solvent_iba_objective(0.2, 1e3, 1e3) == pytest.approx(5.0)
    assert molbuild.solvent_tmb_objective(1.0, 2.0, 1e200, 1e100) == 0.5
    assert molbuild.miscibility_penalty(math.exp(2), math.exp(2)) == pytest.approx(-10.0)
    with pytest.raises(molbuild.MolbuildError):
        molbuild.solvent_iba_objective(0.0, 1.0, 1.0)


def test_design_finds_butane():
    config = {
        "alphabet": "solvent-CNO",
        "constraints": {"max_atoms": 4},
        "policy": {"d": 16, "n_layers": 1, "n_heads": 2, "ff_dim": 32},
        "learner": {"archive_size": 20, "beam": 64, "sigma": 20, "epochs": 15,
                    "batches_per_epoch": 10, "batch_size": 32, "lr": 3e-3},
        "objective": {"type": "isomer", "formula": "C4H10"},
        "seed": 5,
    }
    out = molbuild.design(config)
    assert out["best"][0]["objective"] == 1.0
    assert {"CCCC", "CC(C)C"} <= {e["smiles"] for e in out["best"] if e["objective"] == 1.0}
    assert len(out["history"]) <= 15
    assert molbuild.design(config)["best"] == out["best"]


def test_run_cli_in_process():
    code, out, _ = molbuild.run_cli(["enumerate", "--alphabet", "C", "--max-atoms", "2"])
    assert code == 0
    assert out.splitlines()[0] == "4"
    code, _, _ = molbuild.run_cli(["enumerate", "--alphabet", "C", "--max-atoms", "9"])
    assert code == 2


@pytest.mark.skipif("MOLBUILD_CLI" not in os.environ, reason="command-line tool path not given")
def test_cli_executable_roundtrip():
    corpus = os.path.join(os.environ.get("MOLBUILD_DATA_DIR", "data"), "corpus.smi")
    result = subprocess.run(
        [os.environ["MOLBUILD_CLI"], "roundtrip", "--corpus", corpus, "--alphabet", "drug-full"],
        capture_output=True, text=True, check=False)
    assert result.returncode == 0
    assert "FAIL" not in result.stdout
