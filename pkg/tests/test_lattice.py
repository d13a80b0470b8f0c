from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from wang_landau.core import gaussian_random_walk, step_target
from wang_landau.errors import ConfigurationError, DomainError
from wang_landau.lattice import (
    LatticePoint,
    RationalFrequencies,
    displacement,
    irreducibility_smoke_test,
    lattice_path,
    lattice_point_from_coordinates,
    verify_path,
    zero_return_path,
)


def _random_frequencies(rng: np.random.Generator) -> RationalFrequencies:
    denominator = int(rng.integers(2, 31))
    d = int(rng.integers(2, min(5, denominator) + 1))
    cuts = sorted(rng.choice(np.arange(1, denominator), size=d - 1, replace=False).tolist())
    numerators = np.diff([0, *cuts, denominator])
    return RationalFrequencies(tuple(Fraction(int(n), denominator) for n in numerators))


@pytest.mark.parametrize(
    ("phi", "expected", "denominator"),
    [
        ((Fraction(3, 4), Fraction(1, 4)), (3, 1), 4),
        ((Fraction(1, 2), Fraction(1, 3), Fraction(1, 6)), (3, 2, 1), 6),
        ((Fraction(1, 4),) * 4, (1, 1, 1, 1), 4),
        ((Fraction(2, 10), Fraction(8, 10)), (1, 4), 5),
    ],
)
def test_zero_return_path(phi, expected, denominator):
    frequencies = RationalFrequencies(phi)
    cycle = zero_return_path(frequencies)
    assert cycle.counts == expected
    assert frequencies.denominator == denominator
    assert cycle.total == sum(expected)
    assert cycle.is_zero()


def test_zero_return_identity_for_three_quarters():
    phi = RationalFrequencies.parse("3/4,1/4")
    cycle = zero_return_path(phi)
    assert cycle.total == 4
    assert 3 - Fraction(3, 4) * 4 == 0
    assert cycle.coordinates == (Fraction(0), Fraction(0))


def test_frequencies_from_floats_and_strings():
    assert RationalFrequencies((0.75, 0.25)).phi == (Fraction(3, 4), Fraction(1, 4))
    assert str(RationalFrequencies.parse("1/2, 1/3, 1/6")) == "1/2,1/3,1/6"
    assert RationalFrequencies.parse("3/4,1/4").numerators == (3, 1)


@pytest.mark.parametrize("text", ["1/2,1/3", "1/2", "x,1/2", "1/0,1", "0,1"])
def test_invalid_rational_frequencies(text):
    with pytest.raises(ConfigurationError):
        RationalFrequencies.parse(text)


def test_lattice_point_validation():
    phi = RationalFrequencies.parse("3/4,1/4")
    with pytest.raises(DomainError):
        LatticePoint((1, 2, 3), phi)
    with pytest.raises(DomainError):
        LatticePoint((-1, 2), phi)
    assert LatticePoint((1, 0), phi).coordinates == (Fraction(1, 4), Fraction(-1, 4))


def test_path_back_to_zero():
    phi = RationalFrequencies.parse("3/4,1/4")
    start = LatticePoint((1, 0), phi)
    end = LatticePoint((0, 0), phi)
    path = lattice_path(phi, start, end)
    assert path == (2, 1)
    assert all(s + k == e for s, k, e in zip(start.coordinates, displacement(phi, path), end.coordinates))


def test_path_between_equal_points_is_the_zero_cycle():
    phi = RationalFrequencies.parse("1/2,1/3,1/6")
    origin = LatticePoint((0, 0, 0), phi)
    assert lattice_path(phi, origin, origin) == zero_return_path(phi).counts


def test_path_to_coordinates():
    phi = RationalFrequencies.parse("3/4,1/4")
    path = lattice_path(phi, (0, 0), ("1/4", "-1/4"))
    assert displacement(phi, path) == (Fraction(1, 4), Fraction(-1, 4))


def test_points_off_the_lattice_are_rejected():
    phi = RationalFrequencies.parse("3/4,1/4")
    with pytest.raises(DomainError):
        lattice_point_from_coordinates(phi, ("1/3", "-1/3"))
    with pytest.raises(DomainError):
        lattice_point_from_coordinates(phi, ("1/4", "1/4"))
    other = RationalFrequencies.parse("1/2,1/2")
    with pytest.raises(DomainError):
        lattice_path(phi, LatticePoint((1, 0), other), (0, 0))


def test_random_paths_are_exact():
    rng = np.random.default_rng(30)
    for _ in range(50):
        phi = _random_frequencies(rng)
        cycle = zero_return_path(phi)
        assert sum(cycle.counts) == phi.denominator
        assert all(n - p * cycle.total == 0 for n, p in zip(cycle.counts, phi.phi))

        start = LatticePoint(tuple(int(v) for v in rng.integers(0, 11, size=phi.d)), phi)
        end = LatticePoint(tuple(int(v) for v in rng.integers(0, 11, size=phi.d)), phi)
        path = lattice_path(phi, start, end)
        assert all(isinstance(k, int) and k >= 0 for k in path)
        assert verify_path(phi, start, end, path)

        recovered = lattice_point_from_coordinates(phi, end.coordinates)
        assert recovered.coordinates == end.coordinates


def test_lazy_and_mixed_patterns_are_realized(toy_target):
    phi = RationalFrequencies.parse("3/4,1/4")
    report = irreducibility_smoke_test(
        toy_target, gaussian_random_walk(1.0), phi, trials=2000, seed=7, count_vectors=[(3, 0), (2, 1)], x0=0.0
    )
    assert report.start_bin == 1
    assert report.fraction_for((3, 0)) > 0
    assert report.fraction_for((2, 1)) > 0
    assert report.warnings == []


def test_default_patterns_include_the_lazy_vector(toy_target):
    phi = RationalFrequencies.parse("3/4,1/4")
    report = irreducibility_smoke_test(toy_target, gaussian_random_walk(1.0), phi, trials=200, seed=1, x0=0.0)
    assert report.patterns[0].counts == (3, 0)
    assert len(report.patterns) == 5
    assert report.patterns[0].realized > 0


def test_zero_mass_bin_cannot_be_visited(caplog):
    target = step_target((0.0, 1.0, 2.0), (1.0, 0.0))
    phi = RationalFrequencies.parse("1/2,1/2")
    with caplog.at_level("WARNING"):
        report = irreducibility_smoke_test(
            target, gaussian_random_walk(0.5), phi, trials=300, seed=2, count_vectors=[(1, 1)], x0=0.5
        )
    assert report.fraction_for((1, 1)) == 0.0
    assert report.warnings
    assert "zero target mass" in caplog.text


def test_smoke_test_argument_checks(toy_target):
    proposal = gaussian_random_walk(1.0)
    with pytest.raises(ConfigurationError):
        irreducibility_smoke_test(toy_target, proposal, RationalFrequencies.parse("1/2,1/4,1/4"), trials=10)
    with pytest.raises(ConfigurationError):
        irreducibility_smoke_test(toy_target, proposal, RationalFrequencies.parse("1/2,1/2"), trials=0)
    with pytest.raises(ConfigurationError):
        irreducibility_smoke_test(
            toy_target, proposal, RationalFrequencies.parse("1/2,1/2"), trials=5, count_vectors=[(0, 0)]
        )
