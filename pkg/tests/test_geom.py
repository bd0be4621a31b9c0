import numpy as np
import pytest

from roasplit.geom import (
    Cell,
    TimeGrid,
    halving_split_sequence,
    neighbor_facets,
    split_box,
)


def boxes(cells):
    return [c.box for c in cells]


class TestSplitBox:
    def test_cuts_at_benchmark_bounds(self):
        cells = split_box([(-1.0, 1.0)], cuts={0: [-0.5, 0.5]})
        assert boxes(cells) == [((-1.0, -0.5),), ((-0.5, 0.5),), ((0.5, 1.0),)]

    def test_uniform_cube(self):
        cells = split_box([(-1.0, 1.0)] * 3, cells_per_axis=[2, 2, 2])
        assert len(cells) == 8
        assert sum(c.volume() for c in cells) == pytest.approx(8.0)

    def test_no_cuts_identity(self):
        cells = split_box([(-1.0, 1.0)])
        assert boxes(cells) == [((-1.0, 1.0),)]

    def test_cut_outside_interval_rejected(self):
        with pytest.raises(ValueError):
            split_box([(-1.0, 1.0)], cuts={0: [1.5]})
        with pytest.raises(ValueError):
            split_box([(-1.0, 1.0)], cuts={0: [-1.0]})

    def test_duplicate_cut_rejected(self):
        with pytest.raises(ValueError):
            split_box([(-1.0, 1.0)], cuts={0: [0.5, 0.5]})

    def test_tiling_is_exact(self):
        cells = split_box([(-0.7, 0.7), (-1.2, 1.2)], cuts={0: [0.1], 1: [-0.3, 0.4]})
        assert sum(c.volume() for c in cells) == pytest.approx(1.4 * 2.4, rel=1e-15)


class TestNeighborFacets:
    def test_three_cell_line(self):
        cells = split_box([(-1.0, 1.0)], cuts={0: [-0.5, 0.5]})
        facets = neighbor_facets(cells)
        assert [(f.a, f.b, f.axis, f.value, f.sign) for f in facets] == [
            (0, 1, 0, -0.5, 1),
            (1, 2, 0, 0.5, 1),
        ]

    def test_two_by_two_grid_excludes_diagonals(self):
        cells = split_box([(-1.0, 1.0)] * 2, cells_per_axis=[2, 2])
        facets = neighbor_facets(cells)
        assert len(facets) == 4
        pairs = {(f.a, f.b) for f in facets}
        assert (0, 3) not in pairs and (1, 2) not in pairs

    def test_single_cell(self):
        assert neighbor_facets([Cell(0, ((-1.0, 1.0),))]) == []

    def test_facet_box_has_one_collapsed_axis(self):
        cells = split_box([(-1.0, 1.0)] * 3, cells_per_axis=[2, 1, 2])
        for f in neighbor_facets(cells):
            collapsed = [j for j, (lo, hi) in enumerate(f.box) if lo == hi]
            assert collapsed == [f.axis]
            for cid in (f.a, f.b):
                cell = cells[cid]
                for (lo, hi), (clo, chi) in zip(f.box, cell.box):
                    assert clo <= lo and hi <= chi

    def test_partial_facets_from_uneven_partition(self):
        # one tall cell next to two stacked cells: two partial facets
        cells = [
            Cell(0, ((-1.0, 0.0), (-1.0, 1.0))),
            Cell(1, ((0.0, 1.0), (-1.0, 0.0))),
            Cell(2, ((0.0, 1.0), (0.0, 1.0))),
        ]
        facets = neighbor_facets(cells)
        by_pair = {(f.a, f.b): f for f in facets}
        assert set(by_pair) == {(0, 1), (0, 2), (1, 2)}
        assert by_pair[(0, 1)].box == ((0.0, 0.0), (-1.0, 0.0))
        assert by_pair[(0, 2)].box == ((0.0, 0.0), (0.0, 1.0))

    def test_normal_orientation(self):
        cells = split_box([(-1.0, 1.0)], cuts={0: [0.0]})
        (facet,) = neighbor_facets(cells)
        assert facet.normal(1) == (1.0,)  # from cell 0 into cell 1

    def test_input_order_invariance(self):
        cells = split_box([(-1.0, 1.0)] * 2, cells_per_axis=[2, 2])
        shuffled = list(reversed(cells))
        a = [(f.a, f.b, f.axis, f.value) for f in neighbor_facets(cells)]
        b = [(f.a, f.b, f.axis, f.value) for f in neighbor_facets(shuffled)]
        assert a == b


class TestHalvingSplits:
    def test_single_cell(self):
        cells = halving_split_sequence([(-1.0, 1.0)], 1, seed=0)
        assert boxes(cells) == [((-1.0, 1.0),)]

    def test_seeded_two_cells(self):
        # frozen replay: seed 7 picks axis 1 first on the unit square
        cells = halving_split_sequence([(-1.0, 1.0)] * 2, 2, seed=7)
        assert boxes(cells) == [
            ((-1.0, 1.0), (-1.0, 0.0)),
            ((-1.0, 1.0), (0.0, 1.0)),
        ]

    def test_tiling_invariant(self):
        for n_cells in (1, 2, 4, 7, 16):
            cells = halving_split_sequence([(-0.7, 0.7), (-1.2, 1.2)], n_cells, seed=3)
            assert len(cells) == n_cells
            assert sum(c.volume() for c in cells) == pytest.approx(1.4 * 2.4, rel=1e-12)
            # interiors disjoint: check pairwise overlap volumes vanish
            for i in range(n_cells):
                for j in range(i + 1, n_cells):
                    inter = 1.0
                    for (alo, ahi), (blo, bhi) in zip(cells[i].box, cells[j].box):
                        inter *= max(0.0, min(ahi, bhi) - max(alo, blo))
                    assert inter == 0.0

    def test_deterministic_per_seed(self):
        a = halving_split_sequence([(-1.0, 1.0)] * 3, 8, seed=11)
        b = halving_split_sequence([(-1.0, 1.0)] * 3, 8, seed=11)
        assert boxes(a) == boxes(b)
        c = halving_split_sequence([(-1.0, 1.0)] * 3, 8, seed=12)
        assert boxes(a) != boxes(c)


class TestTimeGrid:
    def test_uniform(self):
        grid = TimeGrid.uniform(1.0, 4)
        assert grid.n_intervals == 4
        assert grid.knots[0] == 0.0 and grid.knots[-1] == 1.0

    def test_locate_ties_to_lower_interval(self):
        grid = TimeGrid((0.0, 0.5, 1.0))
        assert grid.locate(0.5) == 0
        assert grid.locate(0.0) == 0
        assert grid.locate(0.75) == 1

    def test_invalid_grids_rejected(self):
        with pytest.raises(ValueError):
            TimeGrid((0.5, 1.0))
        with pytest.raises(ValueError):
            TimeGrid((0.0, 0.0))
        with pytest.raises(ValueError):
            TimeGrid((0.0,))
