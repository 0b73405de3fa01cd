"""
operators: print the exact commutator tables, the evolution-chart wave
operator and the frame bound of the Minkowski null form, and write
operators.yaml.
"""

import logging
from typing import Any, Dict, List

from models.run import RunConfig
from services.commutators import all_table_entries, boost_bracket
from services.nullstruct import cone_sample, frame_bound_certificate, minkowski_form
from services.verify import EVOLUTION_BOX_TEXT, evolution_box_identity
from storage.run_store import RunStore
from utils.helpers import EXIT_CHECK_FAILED, EXIT_OK, format_table

logger = logging.getLogger(__name__)

FRAME_BOUND_SAMPLES = 10000
IDENTITY_TOLERANCE = 1e-9


def operator_tables(seed: int = 0) -> Dict[str, Any]:
    entries: List[Dict[str, Any]] = []
    for entry in all_table_entries():
        entries.append({
            "field": entry.field,
            "derivative": entry.derivative,
            "table": entry.table_name,
            "basis": entry.basis,
            "coefficients": {str(gamma): str(value) for gamma, value in entry.nonzero().items()},
        })
    brackets = []
    for a in range(1, 4):
        for b in range(a + 1, 4):
            c_b, c_a = boost_bracket(a, b)
            brackets.append({"bracket": f"[L{a}, L{b}]", f"L{b}": str(c_b), f"L{a}": str(c_a)})
    certificate = frame_bound_certificate(minkowski_form(), cone_sample(FRAME_BOUND_SAMPLES, seed=seed))
    return {
        "commutators": entries,
        "boost_brackets": brackets,
        "wave_operator": {"evolution_chart": EVOLUTION_BOX_TEXT,
                          "identity_error": evolution_box_identity(seed=seed)},
        "q0_frame_bound": certificate.dict(),
    }


def render_operator_tables(document: Dict[str, Any]) -> str:
    rows = [(e["field"], e["derivative"], e["table"],
             ", ".join(f"{g}: {v}" for g, v in e["coefficients"].items()) or "0")
            for e in document["commutators"]]
    bound = document["q0_frame_bound"]
    return "\n\n".join([
        format_table(("field", "derivative", "table", "nonzero coefficients"), rows),
        format_table(("bracket", "coefficients"),
                     [(b["bracket"], ", ".join(f"{k}: {v}" for k, v in b.items() if k != "bracket"))
                      for b in document["boost_brackets"]]),
        f"{document['wave_operator']['evolution_chart']}\n"
        f"  identity error on a test function: {document['wave_operator']['identity_error']:.3e}",
        f"Q0 frame bound sup |mbar^00| (t/s)^2 = {bound['constant']:.12f} over {bound['sample_size']} cone points",
    ])


def run(config: RunConfig, store: RunStore) -> int:
    document = operator_tables(config.seed)
    store.write_yaml("operators.yaml", document)
    print(render_operator_tables(document))
    if document["wave_operator"]["identity_error"] > IDENTITY_TOLERANCE:
        logger.error("evolution-chart wave operator disagrees with the direct chart")
        return EXIT_CHECK_FAILED
    return EXIT_OK
