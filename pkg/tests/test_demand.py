import numpy as np
import pytest
from scipy import stats

from poolsim.demand import (DemandConfig, arrival_times, generate_demand, load_demand,
                            make_request, write_demand)
from poolsim.errors import ParseError, ValidationError


def test_poisson_central_mass_bound():
    # the [300, 500] band of Poisson(400) holds far more than 99% of the mass
    mass = stats.poisson(400).cdf(500) - stats.poisson(400).cdf(299)
    assert mass > 0.99999


def test_count_in_band_for_most_seeds(grid5):
    inside = 0
    for seed in range(100):
        n = len(generate_demand(grid5, DemandConfig(rate=100, horizon=4 * 3600, seed=seed)))
        inside += 300 <= n <= 500
    assert inside >= 99


def test_zero_horizon_is_empty(grid5):
    assert generate_demand(grid5, DemandConfig(rate=100, horizon=0, seed=1)) == []


def test_same_seed_same_requests(grid5, tmp_path):
    cfg = DemandConfig(rate=300, horizon=3600, seed=42)
    write_demand(generate_demand(grid5, cfg), tmp_path / "a.csv")
    write_demand(generate_demand(grid5, cfg), tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_different_seed_differs(grid5):
    a = generate_demand(grid5, DemandConfig(seed=1))
    b = generate_demand(grid5, DemandConfig(seed=2))
    assert a != b


def test_mean_interarrival():
    rng = np.random.default_rng(7)
    rate = 200.0
    times = arrival_times(rate, 200 * 3600.0, rng)
    assert len(times) >= 10_000
    gaps = np.diff([0.0] + times)
    assert abs(gaps.mean() - 3600 / rate) <= 0.05 * 3600 / rate


def test_generated_requests_are_valid(grid5):
    reqs = generate_demand(grid5, DemandConfig(rate=400, horizon=3600, patience=120, seed=3))
    assert [r.request_id for r in reqs] == list(range(len(reqs)))
    times = [r.request_time for r in reqs]
    assert times == sorted(times)
    for r in reqs:
        assert r.origin != r.destination
        assert 0 <= r.request_time < 3600
        assert r.patience == 120
        route = grid5.shortest_path(r.origin, r.destination)
        assert r.distance == route.length
        assert r.time == pytest.approx(route.duration)


def test_od_pairs_cover_grid_uniformly(grid5):
    reqs = generate_demand(grid5, DemandConfig(rate=2000, horizon=20 * 3600, seed=5))
    counts = np.bincount([r.origin for r in reqs], minlength=len(grid5))
    expected = len(reqs) / len(grid5)
    chi2 = ((counts - expected) ** 2 / expected).sum()
    assert chi2 < stats.chi2(len(grid5) - 1).ppf(0.999)


@pytest.mark.parametrize("field,value", [("rate", 0), ("horizon", -1), ("patience", 0)])
def test_config_rejects(field, value):
    kwargs = {field: value}
    with pytest.raises(ValidationError):
        DemandConfig(**kwargs)


def test_make_request_errors(grid5):
    with pytest.raises(ValidationError):
        make_request(grid5, 0, 3, 3, 0, 300)
    with pytest.raises(ValidationError):
        make_request(grid5, 0, 3, 99, 0, 300)
    with pytest.raises(ValidationError):
        make_request(grid5, 0, 3, 4, 0, 0)


HEADER = "request_id,origin_id,destination_id,request_time_s,patience_s\n"


def _demand(tmp_path, body):
    p = tmp_path / "d.csv"
    p.write_text(HEADER + body, encoding="utf-8")
    return p


def test_load_single_row(tmp_path, grid5):
    reqs = load_demand(_demand(tmp_path, "7,0,24,12.5,300\n"), grid5)
    assert len(reqs) == 1
    r = reqs[0]
    assert (r.request_id, r.origin, r.destination, r.request_time, r.patience) == (7, 0, 24, 12.5, 300)
    assert r.distance == 4000


def test_load_sorts_stably(tmp_path, grid5):
    body = "1,0,1,50,300\n2,0,2,10,300\n3,0,3,50,300\n4,0,4,10,300\n"
    reqs = load_demand(_demand(tmp_path, body), grid5)
    assert [r.request_id for r in reqs] == [2, 4, 1, 3]


@pytest.mark.parametrize("row", ["1,0,1,0,0\n", "1,3,3,0,300\n", "1,0,99,0,300\n"])
def test_load_invalid_rows(tmp_path, grid5, row):
    with pytest.raises(ValidationError):
        load_demand(_demand(tmp_path, row), grid5)


def test_load_duplicate_id(tmp_path, grid5):
    with pytest.raises(ValidationError, match="duplicate"):
        load_demand(_demand(tmp_path, "1,0,1,0,300\n1,0,2,5,300\n"), grid5)


def test_load_malformed_line_number(tmp_path, grid5):
    with pytest.raises(ParseError) as err:
        load_demand(_demand(tmp_path, "1,0,1,0,300\n2,0,x,5,300\n"), grid5)
    assert err.value.line == 3
