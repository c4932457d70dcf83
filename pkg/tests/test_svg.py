import numpy as np
import pytest

from narrowgap.mesh import equilateral_patch
from narrowgap.svg import legend_range, render_svg


def _patch():
    m = equilateral_patch(3)
    vals = np.linspace(0.5, 7.25, m.n_triangles)
    return m, vals


@pytest.mark.parametrize("scale", ["log", "linear"])
def test_one_polygon_per_triangle_and_legend(scale):
    m, vals = _patch()
    svg = render_svg(m.vertices, m.triangles, vals, scale=scale)
    assert svg.count("<polygon") == m.n_triangles
    assert legend_range(svg) == (0.5, 7.25)
    assert f"{scale} scale" in svg


def test_rendering_is_deterministic():
    m, vals = _patch()
    assert render_svg(m.vertices, m.triangles, vals) == render_svg(m.vertices, m.triangles, vals)


def test_extreme_colors_at_ends_of_range():
    m, vals = _patch()
    svg = render_svg(m.vertices, m.triangles, vals, scale="linear")
    fills = [line for line in svg.splitlines() if line.startswith("<polygon")]
    assert 'fill="rgb(68,1,84)"' in fills[0] and 'fill="rgb(253,231,37)"' in fills[-1]


def test_constant_field_renders():
    m, _ = _patch()
    svg = render_svg(m.vertices, m.triangles, np.full(m.n_triangles, 2.0))
    assert legend_range(svg) == (2.0, 2.0)


def test_log_scale_keeps_unclamped_legend():
    m, vals = _patch()
    vals[0] = 0.0
    assert legend_range(render_svg(m.vertices, m.triangles, vals))[0] == 0.0


def test_bad_inputs():
    m, vals = _patch()
    with pytest.raises(ValueError):
        render_svg(m.vertices, m.triangles, vals[:-1])
    with pytest.raises(ValueError):
        render_svg(m.vertices, m.triangles, -vals, scale="log")
    with pytest.raises(ValueError):
        render_svg(m.vertices, m.triangles, vals, scale="cubic")
    with pytest.raises(ValueError):
        legend_range("<svg/>")
