import io

import numpy as np
import pytest

from mfdglht import (
    FunctionalDataset,
    GroupSample,
    IngestionError,
    ValidationError,
    load_csv,
    make_uniform_grid,
    validate,
    write_csv,
)


def make_csv(rows):
    return "group,obs,component,time_index,value\n" + "\n".join(rows) + "\n"


def test_load_minimal_dataset():
    csv = make_csv(["1,1,1,1,1.0", "1,1,1,2,2.0"])
    ds = load_csv(csv)
    assert ds.k == 1 and ds.p == 1 and ds.m == 2
    assert np.allclose(ds.group_values(0), [[[1.0, 2.0]]])


def test_duplicate_cell_rejected():
    csv = make_csv(["1,1,1,1,1.0", "1,1,1,1,2.0", "1,1,1,2,0.0"])
    with pytest.raises(IngestionError, match="duplicate cell"):
        load_csv(csv)


def test_component_count_mismatch_rejected():
    rows = []
    for comp in (1, 2):
        for ti in (1, 2):
            rows.append(f"1,1,{comp},{ti},0.5")
    for comp in (1, 2, 3):
        for ti in (1, 2):
            rows.append(f"2,1,{comp},{ti},0.5")
    with pytest.raises(IngestionError, match="component count mismatch"):
        load_csv(make_csv(rows))


def test_missing_cell_named():
    csv = make_csv(["1,1,1,1,1.0", "1,1,1,2,2.0", "1,2,1,1,3.0"])
    with pytest.raises(IngestionError, match=r"missing cell \(group=1, obs=2, component=1, time_index=2\)"):
        load_csv(csv)


def test_non_finite_value_rejected():
    csv = make_csv(["1,1,1,1,nan", "1,1,1,2,2.0"])
    with pytest.raises(IngestionError, match="non-finite"):
        load_csv(csv)


def test_comment_lines_ignored():
    csv = "# a comment\ngroup,obs,component,time_index,value\n# another\n1,1,1,1,1.0\n1,1,1,2,2.0\n"
    ds = load_csv(csv)
    assert ds.m == 2


def test_round_trip_is_bit_exact():
    rng = np.random.default_rng(0)
    grid = make_uniform_grid(5, 0.0, 1.0)
    groups = tuple(GroupSample(rng.normal(size=(n, 3, 5))) for n in (4, 6))
    ds = FunctionalDataset(grid, groups)
    buf = io.StringIO()
    write_csv(ds, buf)
    again = load_csv(buf.getvalue())
    for i in range(2):
        assert np.array_equal(ds.group_values(i), again.group_values(i))
    buf2 = io.StringIO()
    write_csv(again, buf2)
    assert buf.getvalue() == buf2.getvalue()


def test_validate_passes_well_formed():
    grid = make_uniform_grid(3, 0.0, 1.0)
    ds = FunctionalDataset(grid, (GroupSample(np.zeros((2, 2, 3))),))
    validate(ds)


def test_group_sample_rejects_nan():
    with pytest.raises(ValidationError, match="non-finite"):
        GroupSample(np.array([[[np.nan, 0.0]]]))


def test_dataset_rejects_zero_groups():
    grid = make_uniform_grid(3, 0.0, 1.0)
    with pytest.raises(ValidationError):
        FunctionalDataset(grid, ())


def test_dataset_rejects_grid_mismatch():
    grid = make_uniform_grid(3, 0.0, 1.0)
    with pytest.raises(ValidationError, match="time grid mismatch"):
        FunctionalDataset(grid, (GroupSample(np.zeros((1, 1, 4))),))
