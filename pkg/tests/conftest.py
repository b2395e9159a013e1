from __future__ import annotations

import numpy as np
import pytest

from zdeval.flowdata import Column, ColumnKind, FeatureSchema, FlowTable


def make_table(rows: list[dict], benign_name: str = "Benign", schema: FeatureSchema | None = None) -> FlowTable:
    """Build a FlowTable from row dicts; column kinds inferred from cell types.

    Keys 'attack_class' and 'label' are fixed; string cells become
    categorical, numeric cells numeric, and keys ending in '_id' identifiers.
    """
    if schema is None:
        columns = []
        for key, value in rows[0].items():
            if key == "attack_class":
                kind = ColumnKind.ATTACK_CLASS
            elif key == "label":
                kind = ColumnKind.BINARY_LABEL
            elif key.endswith("_id"):
                kind = ColumnKind.IDENTIFIER
            elif isinstance(value, str):
                kind = ColumnKind.CATEGORICAL
            else:
                kind = ColumnKind.NUMERIC
            columns.append(Column(key, kind))
        schema = FeatureSchema(tuple(columns))

    data: dict[str, np.ndarray] = {}
    for col in schema.columns:
        cells = [r[col.name] for r in rows]
        if col.kind is ColumnKind.NUMERIC:
            data[col.name] = np.array(cells, dtype=np.float64)
        elif col.kind is ColumnKind.BINARY_LABEL:
            data[col.name] = np.array(cells, dtype=np.int64)
        else:
            data[col.name] = np.array([str(c) for c in cells], dtype=object)
    table = FlowTable(schema, benign_name, data)
    table.validate()
    return table


@pytest.fixture
def small_table() -> FlowTable:
    return make_table(
        [
            {"flow_id": "a", "dur": 1.0, "proto": "tcp", "attack_class": "Benign", "label": 0},
            {"flow_id": "b", "dur": 2.0, "proto": "udp", "attack_class": "Dos", "label": 1},
            {"flow_id": "c", "dur": 3.0, "proto": "tcp", "attack_class": "Worms", "label": 1},
            {"flow_id": "d", "dur": 4.0, "proto": "icmp", "attack_class": "Dos", "label": 1},
            {"flow_id": "e", "dur": 5.0, "proto": "tcp", "attack_class": "Benign", "label": 0},
        ]
    )
