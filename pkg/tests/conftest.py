import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rovmeasure import datasets  # noqa: E402


@pytest.fixture
def worked_files(tmp_path):
    rib = tmp_path / "fixture.jsonl"
    vrps = tmp_path / "fixture.csv"
    rib.write_text(datasets.worked_example_jsonl())
    vrps.write_text(datasets.worked_example_vrps_csv())
    return rib, vrps
