"""Molecular design by sequential graph edits.

Alphabets are preset names ("solvent-CNO", "drug-full") or dicts such as
{"symbols": ["C", "O"], "max_bond_order": 2}. Objectives, constraints and
run configurations are the same dicts the command-line tool reads as JSON.
"""

from ._molbuild import (
    Molecule,
    MolbuildError,
    action_trace,
    design,
    enumerate,
    isomorphic,
    level0_mask,
    miscibility_penalty,
    parse_smiles,
    run_cli,
    score,
    solvent_iba_objective,
    solvent_tmb_objective,
    write_smiles,
)

__all__ = [
    "Molecule",
    "MolbuildError",
    "action_trace",
    "design",
    "enumerate",
    "isomorphic",
    "level0_mask",
    "miscibility_penalty",
    "parse_smiles",
    "run_cli",
    "score",
    "solvent_iba_objective",
    "solvent_tmb_objective",
    "write_smiles",
]
