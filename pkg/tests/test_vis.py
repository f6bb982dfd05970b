import numpy as np
import pytest
from PIL import Image

from progrun.extrema import Max, Min
from progrun.histogram import Histogram2D
from progrun.inputs import RangeQuery, Variable
from progrun.scheduler import Scheduler
from progrun.selection import Select
from progrun.vis import (
    COLORMAPS,
    Heatmap,
    ScatterSample,
    Scatterplot,
    render_frame,
)

from helpers import make_source


@pytest.fixture
def sched():
    return Scheduler()


class TestRenderFrame:
    def test_zero_grid_is_uniform_background(self):
        frame = render_frame(np.zeros((8, 8), dtype=np.int64), "viridis", "linear")
        pixels = frame.pixels.reshape(-1, 4)
        assert (pixels == pixels[0]).all()
        assert pixels[0][:3].tolist() == COLORMAPS["viridis"][0].tolist()

    def test_single_hot_cell_is_unique_max_pixel(self):
        grid = np.zeros((4, 4), dtype=np.int64)
        grid[1, 2] = 17
        frame = render_frame(grid, "viridis", "linear")
        top_color = COLORMAPS["viridis"][255]
        hits = (frame.pixels[:, :, :3] == top_color).all(axis=2)
        assert hits.sum() == 1
        # row 1 of the grid lands at row height-1-1 after the vertical flip
        assert hits[4 - 1 - 1, 2]

    def test_linear_transform_preserves_count_order(self):
        rng = np.random.default_rng(1)
        grid = rng.integers(0, 1000, size=(6, 6))
        frame = render_frame(grid, "gray", "linear")
        intensity = frame.pixels[::-1, :, 0].astype(int)  # gray: r==g==b
        flat_counts = grid.ravel()
        flat_intensity = intensity.ravel()
        order = np.argsort(flat_counts, kind="stable")
        diffs = np.diff(flat_intensity[order])
        assert (diffs >= 0).all()

    def test_log1p_also_monotone(self):
        grid = np.arange(16).reshape(4, 4)
        frame = render_frame(grid, "gray", "log1p")
        intensity = frame.pixels[::-1, :, 0].astype(int).ravel()
        assert (np.diff(intensity) >= 0).all()

    def test_png_deterministic(self):
        rng = np.random.default_rng(2)
        grid = rng.integers(0, 50, size=(32, 32))
        a = render_frame(grid, "viridis", "linear").to_png()
        b = render_frame(grid, "viridis", "linear").to_png()
        assert a == b
        img = Image.open(__import__("io").BytesIO(a))
        assert img.size == (32, 32)
        assert img.mode == "RGBA"

    def test_unknown_transform_rejected(self):
        with pytest.raises(ValueError):
            render_frame(np.zeros((2, 2)), "viridis", "sqrt")


class TestHeatmapModule:
    def _pipeline(self, sched, data, xbins=8, ybins=8, **heat_params):
        src = make_source(sched, data, chunk_size=max(len(data["x"]) // 4, 1))
        lo, hi = Min(scheduler=sched), Max(scheduler=sched)
        hist = Histogram2D("x", "y", scheduler=sched, xbins=xbins, ybins=ybins)
        heat = Heatmap(scheduler=sched, **heat_params)
        sched.connect(src, "df", lo, "df")
        sched.connect(src, "df", hi, "df")
        sched.connect(src, "df", hist, "df")
        sched.connect(lo, "df", hist, "min")
        sched.connect(hi, "df", hist, "max")
        sched.connect(hist, "df", heat, "array")
        return hist, heat

    def test_frame_tracks_grid(self, sched):
        rng = np.random.default_rng(3)
        data = {"x": rng.uniform(size=200).tolist(), "y": rng.uniform(size=200).tolist()}
        hist, heat = self._pipeline(sched, data)
        sched.run_until_quiescent(max_seconds=10)
        frame = heat.frame
        assert frame is not None
        assert (frame.width, frame.height) == (8, 8)
        assert frame.run_number == int(hist.get_data("df").column("_update").max())
        assert frame.bounds == pytest.approx(hist.bounds)

    def test_history_ring_bounded(self, sched):
        rng = np.random.default_rng(4)
        data = {"x": rng.uniform(size=400).tolist(), "y": rng.uniform(size=400).tolist()}
        hist, heat = self._pipeline(sched, data, history=3)
        sched.run_until_quiescent(max_seconds=10)
        assert 1 <= len(heat.history) <= 3

    def test_stamp_never_decreases(self, sched):
        rng = np.random.default_rng(5)
        data = {"x": rng.uniform(size=300).tolist(), "y": rng.uniform(size=300).tolist()}
        hist, heat = self._pipeline(sched, data)
        stamps = []
        while True:
            acts = sched.run_cycle()
            if heat.frame is not None:
                stamps.append(heat.frame.run_number)
            if acts == 0:
                break
        assert stamps == sorted(stamps)


class TestScatterSample:
    def test_all_rows_kept_when_under_capacity(self, sched):
        data = {"x": [float(i) for i in range(10)], "y": [0.0] * 10}
        src = make_source(sched, data, chunk_size=3)
        samp = ScatterSample("x", "y", scheduler=sched, size=50)
        sched.connect(src, "df", samp, "df")
        sched.run_until_quiescent(max_seconds=5)
        out = samp.get_data("df")
        assert len(out) == 10
        assert sorted(out.column("x").tolist()) == data["x"]

    def test_empty_input_empty_sample(self, sched):
        src = make_source(sched, {"x": [], "y": []})
        samp = ScatterSample("x", "y", scheduler=sched, size=10)
        sched.connect(src, "df", samp, "df")
        sched.run_until_quiescent(max_seconds=5)
        out = samp.get_data("df")
        assert out is None or len(out) == 0

    def test_reservoir_size_capped(self, sched):
        rng = np.random.default_rng(6)
        n = 5000
        data = {"x": rng.uniform(size=n).tolist(), "y": rng.uniform(size=n).tolist()}
        src = make_source(sched, data, chunk_size=500)
        samp = ScatterSample("x", "y", scheduler=sched, size=64, seed=1)
        sched.connect(src, "df", samp, "df")
        sched.run_until_quiescent(max_seconds=10)
        out = samp.get_data("df")
        assert len(out) == 64
        src_ids = out.column("src_id")
        assert len(np.unique(src_ids)) == 64

    def test_inclusion_roughly_uniform(self):
        # Monte-Carlo: each row's inclusion frequency ~ S/n within 3 sigma
        trials = 200
        n, size = 2000, 50
        hits = np.zeros(n)
        base = {"x": [float(i) for i in range(n)], "y": [0.0] * n}
        for t in range(trials):
            sched = Scheduler()
            src = make_source(sched, base, chunk_size=n)
            samp = ScatterSample("x", "y", scheduler=sched, size=size, seed=t)
            sched.connect(src, "df", samp, "df")
            sched.run_until_quiescent(max_seconds=10)
            chosen = samp.get_data("df").column("src_id")
            hits[np.asarray(chosen, dtype=int)] += 1
        p = size / n
        sigma = np.sqrt(trials * p * (1 - p))
        # aggregate first/last halves rather than per-row to damp variance
        assert abs(hits[: n // 2].mean() - trials * p) < 3 * sigma / np.sqrt(n // 2)
        assert abs(hits[n // 2 :].mean() - trials * p) < 3 * sigma / np.sqrt(n // 2)


class TestScatterplotDependents:
    def test_graph_matches_reference_wiring(self, sched):
        src = make_source(sched, {"x": [1.0], "y": [2.0]})
        plot = Scatterplot("x", "y", scheduler=sched, xbins=8, ybins=8)
        mods = plot.create_dependent_modules(src, "df")
        assert set(mods) == {
            "min", "max", "variable_min", "variable_max", "range_query",
            "select", "histogram2d", "heatmap", "scatter_sample",
        }
        edges = {
            (c.producer, c.out_slot, c.consumer, c.in_slot)
            for c in sched.connections()
        }
        expect = {
            (src.name, "df", mods["min"].name, "df"),
            (src.name, "df", mods["max"].name, "df"),
            (mods["min"].name, "df", mods["variable_min"].name, "like"),
            (mods["max"].name, "df", mods["variable_max"].name, "like"),
            (mods["variable_min"].name, "df", mods["range_query"].name, "min"),
            (mods["variable_max"].name, "df", mods["range_query"].name, "max"),
            (src.name, "df", mods["select"].name, "df"),
            (mods["range_query"].name, "df", mods["select"].name, "query"),
            (mods["select"].name, "df", mods["histogram2d"].name, "df"),
            (mods["min"].name, "df", mods["histogram2d"].name, "min"),
            (mods["max"].name, "df", mods["histogram2d"].name, "max"),
            (mods["histogram2d"].name, "df", mods["heatmap"].name, "array"),
            (mods["select"].name, "df", mods["scatter_sample"].name, "df"),
            (mods["heatmap"].name, "frame", plot.name, "frame"),
            (mods["scatter_sample"].name, "df", plot.name, "sample"),
        }
        assert edges == expect

    def test_types_are_correct(self, sched):
        src = make_source(sched, {"x": [1.0], "y": [2.0]})
        plot = Scatterplot("x", "y", scheduler=sched)
        mods = plot.create_dependent_modules(src, "df")
        assert isinstance(mods["min"], Min)
        assert isinstance(mods["max"], Max)
        assert isinstance(mods["range_query"], RangeQuery)
        assert isinstance(mods["select"], Select)
        assert all(isinstance(mods[k], Variable) for k in ("variable_min", "variable_max"))

    def test_undefined_variables_pass_all_rows(self, sched):
        rng = np.random.default_rng(8)
        data = {"x": rng.uniform(size=300).tolist(), "y": rng.uniform(size=300).tolist()}
        src = make_source(sched, data, chunk_size=100)
        plot = Scatterplot("x", "y", scheduler=sched, xbins=8, ybins=8)
        mods = plot.create_dependent_modules(src, "df")
        sched.run_until_quiescent(max_seconds=10)
        assert len(mods["select"].get_data("df")) == 300
        assert mods["histogram2d"].grid.sum() == 300

    def test_applied_twice_gives_disjoint_subgraphs(self, sched):
        src_a = make_source(sched, {"x": [1.0], "y": [2.0]})
        src_b = make_source(sched, {"x": [3.0], "y": [4.0]})
        plot_a = Scatterplot("x", "y", scheduler=sched)
        plot_b = Scatterplot("x", "y", scheduler=sched)
        mods_a = plot_a.create_dependent_modules(src_a, "df")
        mods_b = plot_b.create_dependent_modules(src_b, "df")
        names_a = {m.name for m in mods_a.values()}
        names_b = {m.name for m in mods_b.values()}
        assert not names_a & names_b

    def test_range_steering_filters_view(self, sched):
        rng = np.random.default_rng(9)
        data = {"x": rng.uniform(size=400).tolist(), "y": rng.uniform(size=400).tolist()}
        src = make_source(sched, data, chunk_size=200)
        plot = Scatterplot("x", "y", scheduler=sched, xbins=8, ybins=8)
        mods = plot.create_dependent_modules(src, "df")
        sched.run_until_quiescent(max_seconds=10)
        mods["variable_min"].from_input({"x": 0.25})
        mods["variable_max"].from_input({"x": 0.75})
        sched.run_until_quiescent(max_seconds=10)
        xs = np.asarray(data["x"])
        expected = int(((xs > 0.25) & (xs < 0.75)).sum())
        assert len(mods["select"].get_data("df")) == expected
        assert mods["histogram2d"].grid.sum() == expected
