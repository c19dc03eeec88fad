import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from quadpong.metrics import (
    CENSORED,
    RUN_CSV_HEADER,
    CellResult,
    GenerationStats,
    SweepRow,
    aggregate,
    learned_generation,
    population_sweep,
    read_run_csv,
    read_sweep_csv,
    scenario_sweep,
    write_run_csv,
    write_sweep_csv,
)

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)
counts = st.integers(0, 10)


@st.composite
def stats_rows(draw):
    n = draw(st.integers(0, 30))
    rows, cumulative = [], 0
    for g in range(1, n + 1):
        per_side = tuple(draw(counts) for _ in range(4))
        steps = draw(st.integers(1, 200000))
        cumulative += steps
        rows.append(GenerationStats(g, draw(finite), draw(finite), sum(per_side),
                                    per_side, steps, cumulative))
    return rows


def sample_rows(n):
    return [GenerationStats(g, 10.0 * g, 1.0 / g, 4, (1, 1, 1, 1), 100, 100 * g)
            for g in range(1, n + 1)]


def test_header_only_for_empty_stats(tmp_path):
    path = tmp_path / "stats.csv"
    write_run_csv([], path)
    assert path.read_text().splitlines() == [",".join(RUN_CSV_HEADER)]
    assert read_run_csv(path) == []


def test_line_count(tmp_path):
    path = tmp_path / "stats.csv"
    write_run_csv(sample_rows(22), path)
    assert len(path.read_text().splitlines()) == 23


@given(stats_rows())
def test_run_csv_round_trip(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("rt") / "stats.csv"
    write_run_csv(rows, path)
    assert read_run_csv(path) == rows


def test_stats_validation(tmp_path):
    with pytest.raises(ValueError):
        GenerationStats(1, 0.0, 0.0, 5, (1, 1, 1, 1), 1, 1)
    with pytest.raises(ValueError):
        write_run_csv(list(reversed(sample_rows(2))), tmp_path / "x.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("generation,best\n1,2\n")
    with pytest.raises(ValueError):
        read_run_csv(bad)


def test_learned_generation():
    rows = sample_rows(10)
    assert learned_generation(rows, 35.0) == 4
    assert learned_generation(rows, 1e9) is None


def cell(gen, seed=0):
    return CellResult(4, 20, seed, gen, gen or 100)


def test_aggregate_median_and_censoring():
    row = aggregate(20, [cell(3), cell(None), cell(7), cell(5), cell(None)])
    assert row.median_generations_to_learned == 7 and row.success_rate == 0.6
    censored = aggregate(20, [cell(None), cell(None), cell(4)])
    assert censored.median_generations_to_learned == CENSORED
    assert censored.success_rate == pytest.approx(1 / 3)
    assert aggregate(20, [cell(2), cell(5)]).median_generations_to_learned == 3.5
    with pytest.raises(ValueError):
        aggregate(20, [])


def test_sweep_csv_round_trip(tmp_path):
    rows = [SweepRow(4, 5, CENSORED, 0.0), SweepRow(20, 5, 12, 0.8), SweepRow(40, 5, 3.5, 1.0)]
    path = tmp_path / "sweep.csv"
    write_sweep_csv(rows, path)
    assert read_sweep_csv(path) == rows
    assert len(path.read_text().splitlines()) == 4


QUICK = {"trainer": {"max_generations": 3, "learned_threshold": 60.0,
                     "max_steps_per_episode": 2000}}


def test_population_sweep_shape_and_recomputation(tmp_path):
    rows = population_sweep(seeds=range(2), configs=QUICK, out_dir=tmp_path)
    assert [r.population_size for r in rows] == [4, 8, 16, 20, 32, 40]
    assert all(r.seeds_run == 2 for r in rows)
    # aggregation is a pure function of the stored per-run files
    for r in rows:
        cells = []
        for seed in range(2):
            stats = read_run_csv(tmp_path / f"sides4-pop{r.population_size}-seed{seed}.csv")
            cells.append(CellResult(4, r.population_size, seed,
                                    learned_generation(stats, 60.0), len(stats)))
        assert aggregate(r.population_size, cells) == r


def test_scenario_sweep_rows(tmp_path):
    rows = scenario_sweep(seeds=range(2), configs=QUICK, out_dir=tmp_path)
    assert [(r.label, r.population_size) for r in rows] == [("1-side", 4), ("2-side", 8), ("4-side", 20)]
    assert len(list(tmp_path.glob("*.csv"))) == 6


def test_parallel_sweep_matches_serial(tmp_path):
    serial = scenario_sweep(seeds=range(2), configs=QUICK, jobs=1)
    parallel = scenario_sweep(seeds=range(2), configs=QUICK, jobs=2)
    assert serial == parallel


def test_sweep_rejects_bad_input():
    with pytest.raises(ValueError):
        population_sweep(sizes=[4, 6], seeds=[0])
    with pytest.raises(ValueError):
        population_sweep(seeds=[])
    with pytest.raises(ValueError):
        scenario_sweep(scenarios=[(2, 5)], seeds=[0])


def test_failed_cell_is_recorded_not_raised():
    bad = {"trainer": {"no_such_option": 1}}
    rows = scenario_sweep(scenarios=[(1, 4)], seeds=[0], configs=bad)
    assert rows[0].median_generations_to_learned == CENSORED
    assert math.isclose(rows[0].success_rate, 0.0)
