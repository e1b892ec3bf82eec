import math

import pytest
from hypothesis import given, strategies as st

from eldersim.core import GridLocation
from eldersim.floor_plan import (
    BODY_RADIUS_CM,
    LayoutError,
    Rect,
    bundled_layout_path,
    check_zones,
    load_plan,
    walkable,
    walkable_mask,
)


def _write_layout(tmp_path, furniture="", zones="", sensors="",
                  bounds=(400, 400)):
    text = (f"[bounds]\nwidth = {bounds[0]}\nheight = {bounds[1]}\n"
            f"[furniture]\n{furniture}\n[zones]\n{zones}\n"
            f"[sensors]\n{sensors}\n")
    path = tmp_path / "layout.ini"
    path.write_text(text)
    return path


class TestBundledLayout:
    def test_loads_with_expected_topology(self, studio):
        plan, zones, sensors = studio
        labels = {label for label, _ in plan.furniture}
        for required in ("bed", "dining_table", "kitchen_stove",
                         "water_closet", "chair", "cupboard", "trash_box",
                         "wardrobe", "washing_machine", "refrigerator"):
            assert required in labels
        kinds = [s.kind for s in sensors]
        assert kinds.count("PIR") == 21
        assert kinds.count("PR") == 2
        assert kinds.count("COST") == 4
        assert [s.id for s in sensors] == list(range(1, 28))

    def test_sensor_rates(self, studio):
        _, _, sensors = studio
        for s in sensors:
            assert s.sample_rate_hz == (1.0 if s.kind == "COST" else 10.0)

    def test_zone_cells_walkable_at_body_radius(self, studio):
        plan, zones, _ = studio
        for place, cells in zones.zones.items():
            for cell in cells:
                assert walkable(plan, cell, BODY_RADIUS_CM), (place, cell)

    def test_check_zones(self, studio):
        _, zones, _ = studio
        check_zones(zones, ["bed", "kitchen"])
        with pytest.raises(LayoutError, match="lounge"):
            check_zones(zones, ["lounge"])


class TestLoadErrors:
    def test_clearance_violation_names_both_pieces(self, tmp_path):
        path = _write_layout(tmp_path,
                             furniture="sofa = 10,10,100,100\n"
                                       "table = 150,10,250,100\n")
        with pytest.raises(LayoutError) as err:
            load_plan(path)
        assert "sofa" in str(err.value) and "table" in str(err.value)

    def test_zone_on_furniture(self, tmp_path):
        path = _write_layout(tmp_path,
                             furniture="wardrobe = 100,100,200,200\n",
                             zones="dressing = 120,120,180,180\n")
        with pytest.raises(LayoutError, match="dressing"):
            load_plan(path)

    def test_parse_error(self, tmp_path):
        path = _write_layout(tmp_path, furniture="bed = 1,2,3\n")
        with pytest.raises(LayoutError):
            load_plan(path)

    def test_unknown_sensor_kind(self, tmp_path):
        path = _write_layout(tmp_path, sensors="cam = CAMERA,10,10\n")
        with pytest.raises(LayoutError, match="cam"):
            load_plan(path)

    def test_cost_needs_appliance(self, tmp_path):
        path = _write_layout(tmp_path, sensors="c1 = COST\n")
        with pytest.raises(LayoutError):
            load_plan(path)


@pytest.fixture(scope="module")
def plan(tmp_path_factory):
    path = _write_layout(tmp_path_factory.mktemp("plan"),
                         furniture="box = 150,150,250,250\n")
    return load_plan(path)[0]


_BOX_PLAN = None


def _box_plan():
    global _BOX_PLAN
    if _BOX_PLAN is None:
        from eldersim.floor_plan import FloorPlan
        _BOX_PLAN = FloorPlan(400, 400,
                              [("box", Rect(150, 150, 250, 250))], [])
    return _BOX_PLAN


class TestWalkable:

    def test_open_floor(self, plan):
        assert walkable(plan, GridLocation(80, 80), 10)

    def test_furniture_center(self, plan):
        assert not walkable(plan, GridLocation(200, 200), 10)

    def test_out_of_bounds_is_error(self, plan):
        with pytest.raises(ValueError):
            walkable(plan, GridLocation(500, 10), 10)

    def test_against_disc_rectangle_oracle(self, plan):
        # fall posture: 45 cm from the edge with a 40 cm radius clears
        rect = Rect(150, 150, 250, 250)
        for p, radius in [(GridLocation(105, 200), 40),
                          (GridLocation(120, 200), 40),
                          (GridLocation(110, 110), 40),
                          (GridLocation(140, 140), 10)]:
            expected = rect.distance_to(p.x, p.y) >= radius \
                and min(p.x, p.y, 400 - p.x, 400 - p.y) >= radius
            assert walkable(plan, p, radius) == expected

    @given(st.integers(min_value=0, max_value=40),
           st.integers(min_value=0, max_value=40),
           st.integers(min_value=1, max_value=35),
           st.integers(min_value=0, max_value=34))
    def test_monotone_in_radius(self, ix, iy, r, smaller_delta):
        p = GridLocation(ix * 10, iy * 10)
        smaller = max(1, r - smaller_delta)
        if walkable(_box_plan(), p, r):
            assert walkable(_box_plan(), p, smaller)

    def test_mask_matches_pointwise(self, plan):
        mask = walkable_mask(plan, 10)
        for ix in range(0, mask.shape[0], 7):
            for iy in range(0, mask.shape[1], 7):
                p = GridLocation(ix * 10, iy * 10)
                assert mask[ix, iy] == walkable(plan, p, 10)


class TestWalls:
    def test_wall_blocks(self, tmp_path):
        path = _write_layout(tmp_path)
        text = path.read_text() + "[walls]\nw1 = 200,0,200,300\n"
        path.write_text(text)
        plan, _, _ = load_plan(path)
        assert not walkable(plan, GridLocation(200, 100), 10)
        assert not walkable(plan, GridLocation(205, 100), 10)
        assert walkable(plan, GridLocation(220, 100), 10)
        assert walkable(plan, GridLocation(200, 350), 10)
